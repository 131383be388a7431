#pragma once

// Drop volume from the total-reflection dark band.
//
// Fixed-volume solves alternate with a volume correction driven by the mean
// image brightness I_t over the predicted band ring |N_z - N_crit| <= eps:
//   V <- V + tau_r V (1 - I_t / I_r).
// A ring that is too bright means the drop was estimated too tall (the true
// band is narrower); too dark means too flat.

#include "dropstereo/core.hpp"
#include "dropstereo/optics.hpp"
#include "dropstereo/raytrace.hpp"
#include "dropstereo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dropstereo {

// Where the ring brightness target comes from.
enum class RingTarget {
  // I_r = 0.241 I_b from the linearised band transmittance.
  linear,
  // I_r = I_b times the mean exact Fresnel transmittance over the ring of the
  // current surface estimate.
  fresnel,
};

struct VolumeLoopParams {
  double tau_r = 0.5;
  // Band brightness is sampled near the rim, which is the last part of the
  // surface to settle, so each inner solve runs close to convergence.
  int inner_iters_per_update = 20000;
  double inner_convergence_rel = 1e-7;
  int max_outer_updates = 10;
  double alpha_init = 0.30;
  double rel_volume_tol = 1e-3;
  double band_halfwidth = kDefaultBandHalfwidth;
  RingTarget target = RingTarget::fresnel;
  // Keep each new volume inside the interval bracketed by earlier updates.
  bool bracket = true;
  // No dark band (mirrors): solve once at alpha_init.
  bool fixed_alpha = false;
  double alpha_min = 0.05;
  double alpha_max = 0.60;

  void validate() const {
    if (!(tau_r > 0.0) || inner_iters_per_update < 1 || max_outer_updates < 1 ||
        !(rel_volume_tol > 0.0) || !(band_halfwidth > 0.0) ||
        !(inner_convergence_rel > 0.0))
      throw DomainError("VolumeLoopParams: parameters must be positive");
    if (!(alpha_min > 0.0) || !(alpha_min < alpha_max))
      throw DomainError("VolumeLoopParams: need 0 < alpha_min < alpha_max");
    if (alpha_init < alpha_min || alpha_init > alpha_max)
      throw DomainError("VolumeLoopParams: alpha_init outside [alpha_min, alpha_max]");
  }
};

inline constexpr int kMinRingPixels = 8;

// Water pixels whose normal lies within `halfwidth` of the local critical value.
inline std::vector<std::array<int, 2>> band_ring(const DropSurface& surface, double halfwidth) {
  std::vector<std::array<int, 2>> ring;
  surface.mask().for_each([&](int i, int j) {
    if (!surface.is_water(i, j)) return;
    if (std::abs(surface.normal(i, j).z() - surface.critical_nz(i, j)) <= halfwidth)
      ring.push_back({i, j});
  });
  return ring;
}

inline double sample_band_brightness(const RasterGray& image, const DropSurface& surface,
                                     double halfwidth = kDefaultBandHalfwidth) {
  const auto ring = band_ring(surface, halfwidth);
  if (static_cast<int>(ring.size()) < kMinRingPixels)
    throw RingTooSmallError("sample_band_brightness: band ring has fewer than 8 pixels");
  double sum = 0.0;
  for (const auto& p : ring) sum += image(p[0], p[1]);
  return sum / static_cast<double>(ring.size());
}

// Mean intensity over pixels outside every drop mask.
inline double background_brightness(const RasterGray& image, const std::vector<DropMask>& drops) {
  double sum = 0.0;
  long n = 0;
  for (int i = 0; i < image.height(); ++i)
    for (int j = 0; j < image.width(); ++j) {
      bool inside = false;
      for (const auto& m : drops)
        if (m.contains(i, j)) {
          inside = true;
          break;
        }
      if (!inside) {
        sum += image(i, j);
        ++n;
      }
    }
  if (n == 0) throw DomainError("target_brightness: no background pixels");
  return sum / static_cast<double>(n);
}

inline constexpr double kBandBrightnessRatio = 0.241;

// I_r = 0.241 I_b.
inline double target_brightness(const RasterGray& image, const std::vector<DropMask>& drops) {
  return kBandBrightnessRatio * background_brightness(image, drops);
}

// Ring brightness the current surface would show in front of a uniform scene
// of brightness I_b: I_b times the mean transmittance over the ring.
inline double predicted_band_brightness(const DropSurface& surface, double background,
                                        double halfwidth = kDefaultBandHalfwidth) {
  const auto ring = band_ring(surface, halfwidth);
  if (static_cast<int>(ring.size()) < kMinRingPixels)
    throw RingTooSmallError("predicted_band_brightness: band ring has fewer than 8 pixels");
  double sum = 0.0;
  for (const auto& p : ring) {
    const auto t = surface.trace(p[0], p[1]);
    if (t) sum += t->transmittance;
  }
  return background * sum / static_cast<double>(ring.size());
}

// V_{t+1} = V_t + tau_r V_t (1 - I_t / I_r), clamped to [alpha_min, alpha_max]
// B^{3/2}.
inline double volume_update(double volume, double sampled, double target, double tau_r,
                            long area_b, double alpha_min = 0.05, double alpha_max = 0.60) {
  if (!(target > 0.0)) throw DomainError("volume_update: target brightness must be positive");
  if (!(volume > 0.0)) throw DomainError("volume_update: volume must be positive");
  const double next = volume + tau_r * volume * (1.0 - sampled / target);
  const double scale = std::pow(static_cast<double>(area_b), 1.5);
  return std::clamp(next, alpha_min * scale, alpha_max * scale);
}

// Warm start for a new volume: z scaled by a common factor keeps the contact
// line pinned and the shape smooth.
inline HeightField scaled_heights(const HeightField& hf, double factor) {
  HeightField out(hf.mask());
  hf.mask().for_each([&](int i, int j) { out.set(i, j, hf(i, j) * factor); });
  return out;
}

struct ShapeEstimate {
  HeightField field;
  double alpha = 0.0;
  SolveReport report;  // final fixed-volume solve
  int total_iterations = 0;  // sweeps across every inner solve
  std::vector<double> alpha_history;  // alpha before each update, then the final value
  std::vector<double> sampled_history;
  std::vector<double> target_history;
};

// Alternates fixed-volume solves and volume updates. `all_drops` lists every
// drop mask in the image (for the background mean); when empty only `mask`
// is excluded.
inline ShapeEstimate estimate_shape(const RasterGray& image, const DropMask& mask,
                                    const OpticalConfig& cfg, const VolumeLoopParams& loop,
                                    const SolverParams& solver,
                                    std::vector<DropMask> all_drops = {}) {
  loop.validate();
  solver.validate();
  cfg.validate();
  if (mask.empty()) throw DomainError("estimate_shape: empty mask");
  if (image.width() != mask.width() || image.height() != mask.height())
    throw DomainError("estimate_shape: image and mask sizes differ");
  if (all_drops.empty()) all_drops.push_back(mask);

  ShapeEstimate est;
  const double scale = std::pow(static_cast<double>(mask.area()), 1.5);
  double volume = loop.alpha_init * scale;
  HeightField field = init_mesh(mask, loop.alpha_init);
  int total_iters = 0;

  if (!loop.fixed_alpha) {
    const double background = background_brightness(image, all_drops);
    double lo = loop.alpha_min * scale, hi = loop.alpha_max * scale;
    SolverParams inner = solver;
    inner.max_iters = loop.inner_iters_per_update;
    inner.convergence_rel = std::min(solver.convergence_rel, loop.inner_convergence_rel);
    for (int k = 0; k < loop.max_outer_updates; ++k) {
      auto [next_field, rep] = solve_fixed_volume(field, volume, inner, cfg);
      field = std::move(next_field);
      total_iters += rep.iterations_run;
      const DropSurface surface(field, cfg);
      const double sampled = sample_band_brightness(image, surface, loop.band_halfwidth);
      const double target =
          loop.target == RingTarget::linear
              ? kBandBrightnessRatio * background
              : predicted_band_brightness(surface, background, loop.band_halfwidth);
      est.alpha_history.push_back(volume / scale);
      est.sampled_history.push_back(sampled);
      est.target_history.push_back(target);

      double next = volume_update(volume, sampled, target, loop.tau_r, mask.area(),
                                  loop.alpha_min, loop.alpha_max);
      if (loop.bracket) {
        if (sampled < target)
          lo = std::max(lo, volume);
        else if (sampled > target)
          hi = std::min(hi, volume);
        if (!(next > lo && next < hi) && hi > lo) next = 0.5 * (lo + hi);
      }
      const double change = std::abs(next - volume) / volume;
      field = scaled_heights(field, next / volume);
      volume = next;
      if (change < loop.rel_volume_tol) break;
    }
  }

  auto [final_field, rep] = solve_fixed_volume(field, volume, solver, cfg);
  total_iters += rep.iterations_run;
  est.field = std::move(final_field);
  est.report = std::move(rep);
  est.total_iterations = total_iters;
  est.alpha = volume / scale;
  est.alpha_history.push_back(est.alpha);
  return est;
}

}  // namespace dropstereo
