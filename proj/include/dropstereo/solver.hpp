#pragma once

// Fixed-volume minimum-energy drop surface.
//
// A sweep is: tension update (mean-curvature descent on the area energy),
// gravity update (planar tilt toward the z-weighted centroid) and volume
// update (uniform shift back to the target volume). With pin_boundary the
// contact line (mask rim) stays at z = 0 and only interior pixels move.

#include "dropstereo/core.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace dropstereo {

struct SolverParams {
  double tau = 0.5;
  int max_iters = 4000;
  double convergence_rel = 1e-6;  // of the target volume
  bool pin_boundary = true;
  int energy_window = 50;  // sweeps between energy samples in the report

  void validate() const {
    if (!(tau > 0.0)) throw DomainError("SolverParams: tau must be positive");
    if (max_iters < 1) throw DomainError("SolverParams: max_iters must be >= 1");
    if (!(convergence_rel > 0.0))
      throw DomainError("SolverParams: convergence_rel must be positive");
    if (energy_window < 1) throw DomainError("SolverParams: energy_window must be >= 1");
  }
};

struct Energy {
  double tension = 0.0;
  double gravity = 0.0;
  double total = 0.0;
};

struct SolveReport {
  int iterations_run = 0;
  double final_energy = 0.0;
  Energy final_energies;
  std::vector<double> sweep_change;  // sum |dz| per sweep
  std::vector<double> energy_trace;  // total energy every energy_window sweeps, first at sweep 0
  bool converged = false;
};

inline double initial_volume(const DropMask& mask, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("initial_volume: alpha must be positive");
  if (mask.area() <= 0) throw DomainError("initial_volume: empty mask");
  return alpha * std::pow(static_cast<double>(mask.area()), 1.5);
}

// Constant-height cylinder z = alpha * sqrt(B).
inline HeightField init_mesh(const DropMask& mask, double alpha) {
  initial_volume(mask, alpha);
  return HeightField(mask, alpha * std::sqrt(static_cast<double>(mask.area())));
}

inline double volume_of(const HeightField& hf) {
  double v = 0.0;
  hf.mask().for_each([&](int i, int j) { v += hf(i, j); });
  return v;
}

// alpha such that V = alpha * B^{3/2}.
inline double alpha_of_volume(const DropMask& mask, double volume) {
  if (mask.area() <= 0) throw DomainError("alpha_of_volume: empty mask");
  return volume / std::pow(static_cast<double>(mask.area()), 1.5);
}

namespace detail {

// Mask pixels flattened to a vector with 4-neighbour indices (-1 = outside).
class Stencil {
 public:
  explicit Stencil(const DropMask& mask) {
    const auto& b = mask.box();
    Grid<int> index(b.cols, b.rows, -1);
    mask.for_each([&](int i, int j) {
      index(i - b.row0, j - b.col0) = static_cast<int>(row.size());
      row.push_back(i);
      col.push_back(j);
    });
    auto idx = [&](int i, int j) {
      return mask.contains(i, j) ? index(i - b.row0, j - b.col0) : -1;
    };
    const std::size_t n = row.size();
    left.resize(n);
    right.resize(n);
    up.resize(n);
    down.resize(n);
    rim.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      left[k] = idx(row[k], col[k] - 1);
      right[k] = idx(row[k], col[k] + 1);
      up[k] = idx(row[k] - 1, col[k]);
      down[k] = idx(row[k] + 1, col[k]);
      rim[k] = left[k] < 0 || right[k] < 0 || up[k] < 0 || down[k] < 0;
    }
  }

  std::size_t size() const { return row.size(); }

  template <class V>
  double deriv(const V& v, std::size_t k, int bwd, int fwd) const {
    if (fwd >= 0 && bwd >= 0) return 0.5 * (v[fwd] - v[bwd]);
    if (fwd >= 0) return v[fwd] - v[k];
    if (bwd >= 0) return v[k] - v[bwd];
    return 0.0;
  }
  template <class V>
  double ddx(const V& v, std::size_t k) const { return deriv(v, k, left[k], right[k]); }
  template <class V>
  double ddy(const V& v, std::size_t k) const { return deriv(v, k, up[k], down[k]); }

  std::vector<double> gather(const HeightField& hf) const {
    std::vector<double> z(size());
    for (std::size_t k = 0; k < size(); ++k) z[k] = hf(row[k], col[k]);
    return z;
  }
  HeightField scatter(const DropMask& mask, const std::vector<double>& z) const {
    HeightField hf(mask);
    for (std::size_t k = 0; k < size(); ++k) hf.set(row[k], col[k], z[k]);
    return hf;
  }

  std::vector<int> row, col, left, right, up, down;
  std::vector<char> rim;
};

inline bool movable(const Stencil& s, std::size_t k, bool pinned) {
  return !pinned || !s.rim[k];
}

// z <- z + tau sigma div(grad z / sqrt(1 + |grad z|^2)), with the divergence
// taken as the adjoint of the gradient stencil so that the step is exactly
// the negative gradient of the discrete tension energy.
inline void tension_update(const Stencil& s, std::vector<double>& z, double tau,
                           double sigma, bool pinned, std::vector<double>& grad,
                           std::vector<double>& flux) {
  const std::size_t n = s.size();
  grad.assign(n, 0.0);
  flux.resize(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double gx = s.ddx(z, k), gy = s.ddy(z, k);
    const double w = 1.0 / std::sqrt(1.0 + gx * gx + gy * gy);
    flux[2 * k] = w * gx;
    flux[2 * k + 1] = w * gy;
  }
  auto scatter = [&](std::size_t k, int bwd, int fwd, double f) {
    if (fwd >= 0 && bwd >= 0) {
      grad[fwd] += 0.5 * f;
      grad[bwd] -= 0.5 * f;
    } else if (fwd >= 0) {
      grad[fwd] += f;
      grad[k] -= f;
    } else if (bwd >= 0) {
      grad[k] += f;
      grad[bwd] -= f;
    }
  };
  for (std::size_t k = 0; k < n; ++k) {
    scatter(k, s.left[k], s.right[k], flux[2 * k]);
    scatter(k, s.up[k], s.down[k], flux[2 * k + 1]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!movable(s, k, pinned)) {
      z[k] = 0.0;
      continue;
    }
    z[k] -= tau * sigma * grad[k];
    if (!std::isfinite(z[k]))
      throw DivergedError("tension_step: non-finite height (reduce tau)");
  }
}

inline void gravity_update(const Stencil& s, std::vector<double>& z, double tau, double g,
                           const std::array<double, 3>& cosines, bool pinned) {
  if (g == 0.0 || (cosines[0] == 0.0 && cosines[1] == 0.0)) return;
  const double B = static_cast<double>(s.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    sx += z[k] * s.col[k];
    sy += z[k] * s.row[k];
  }
  const double xg = sx / B, yg = sy / B;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!movable(s, k, pinned)) continue;
    z[k] -= tau * g * ((yg - s.row[k]) * cosines[1] + (xg - s.col[k]) * cosines[0]);
  }
}

// Uniform shift to the target volume, then clamp negatives to zero and move
// the clamped amount back onto the remaining positive pixels.
inline void volume_update(const Stencil& s, std::vector<double>& z, double target,
                          bool pinned) {
  std::vector<std::size_t> free;
  free.reserve(s.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    if (movable(s, k, pinned)) free.push_back(k);
  if (free.empty()) return;
  double sum = 0.0;
  for (double v : z) sum += v;
  const double shift = (target - sum) / static_cast<double>(free.size());
  for (std::size_t k : free) z[k] += shift;

  for (int pass = 0; pass < 64; ++pass) {
    double deficit = 0.0;
    std::size_t positive = 0;
    for (std::size_t k : free) {
      if (z[k] < 0.0) {
        deficit += z[k];
        z[k] = 0.0;
      } else if (z[k] > 0.0) {
        ++positive;
      }
    }
    if (deficit == 0.0 || positive == 0) break;
    const double d = deficit / static_cast<double>(positive);
    for (std::size_t k : free)
      if (z[k] > 0.0) z[k] += d;
  }
}

inline Energy energy(const Stencil& s, const std::vector<double>& z, const OpticalConfig& cfg) {
  Energy e;
  const auto& c = cfg.gravity_cosines;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double gx = s.ddx(z, k), gy = s.ddy(z, k);
    e.tension += std::sqrt(1.0 + gx * gx + gy * gy);
    e.gravity += z[k] * (s.col[k] * c[0] + s.row[k] * c[1]) + 0.5 * z[k] * z[k] * c[2];
  }
  e.tension *= cfg.tension_weight;
  e.gravity *= cfg.gravity_weight;
  e.total = e.tension + e.gravity;
  return e;
}

}  // namespace detail

// E_T = sigma * sum sqrt(1 + |grad z|^2); E_G = g * sum of the per-column
// integral of (x cos_x + y cos_y + w cos_z) dw from 0 to z.
inline Energy energy_of(const HeightField& hf, const OpticalConfig& cfg) {
  detail::Stencil s(hf.mask());
  return detail::energy(s, s.gather(hf), cfg);
}

inline HeightField tension_step(const HeightField& hf, const SolverParams& params,
                                const OpticalConfig& cfg) {
  params.validate();
  detail::Stencil s(hf.mask());
  auto z = s.gather(hf);
  std::vector<double> fx, fy;
  detail::tension_update(s, z, params.tau, cfg.tension_weight, params.pin_boundary, fx, fy);
  return s.scatter(hf.mask(), z);
}

inline HeightField gravity_step(const HeightField& hf, const SolverParams& params,
                                const OpticalConfig& cfg) {
  params.validate();
  detail::Stencil s(hf.mask());
  auto z = s.gather(hf);
  detail::gravity_update(s, z, params.tau, cfg.gravity_weight, cfg.gravity_cosines,
                         params.pin_boundary);
  return s.scatter(hf.mask(), z);
}

// Adds (V - sum z) / B to every mask pixel (every interior pixel when pinned).
inline HeightField volume_step(const HeightField& hf, double target_volume,
                               bool pin_boundary = false) {
  if (hf.mask().area() <= 0) throw DomainError("volume_step: empty mask");
  detail::Stencil s(hf.mask());
  auto z = s.gather(hf);
  detail::volume_update(s, z, target_volume, pin_boundary);
  return s.scatter(hf.mask(), z);
}

// Called after every sweep with the sweep index and the current volume.
using SweepObserver = std::function<void(int, double)>;

// Runs sweeps starting from `start` until sum |dz| < convergence_rel * V or
// max_iters sweeps.
inline std::pair<HeightField, SolveReport> solve_fixed_volume(const HeightField& start,
                                                              double target_volume,
                                                              const SolverParams& params,
                                                              const OpticalConfig& cfg,
                                                              const SweepObserver& observe = {}) {
  params.validate();
  const DropMask& mask = start.mask();
  if (mask.area() <= 0) throw DomainError("solve_fixed_volume: empty mask");
  if (!(target_volume > 0.0))
    throw DomainError("solve_fixed_volume: target volume must be positive");

  detail::Stencil s(mask);
  std::vector<double> z = s.gather(start), prev, fx, fy;
  SolveReport report;
  const double threshold = params.convergence_rel * target_volume;

  // The start is projected onto the constraint set first so the report's
  // sweep-0 energy refers to an admissible surface.
  detail::volume_update(s, z, target_volume, params.pin_boundary);
  if (params.pin_boundary)
    for (std::size_t k = 0; k < s.size(); ++k)
      if (s.rim[k]) z[k] = 0.0;
  detail::volume_update(s, z, target_volume, params.pin_boundary);
  report.energy_trace.push_back(detail::energy(s, z, cfg).total);

  for (int it = 0; it < params.max_iters; ++it) {
    prev = z;
    detail::tension_update(s, z, params.tau, cfg.tension_weight, params.pin_boundary, fx, fy);
    detail::gravity_update(s, z, params.tau, cfg.gravity_weight, cfg.gravity_cosines,
                           params.pin_boundary);
    detail::volume_update(s, z, target_volume, params.pin_boundary);
    double change = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) change += std::abs(z[k] - prev[k]);
    if (!std::isfinite(change)) throw DivergedError("solve_fixed_volume: diverged");
    report.sweep_change.push_back(change);
    report.iterations_run = it + 1;
    if (observe) {
      double v = 0.0;
      for (double x : z) v += x;
      observe(it, v);
    }
    if ((it + 1) % params.energy_window == 0)
      report.energy_trace.push_back(detail::energy(s, z, cfg).total);
    if (change < threshold) {
      report.converged = true;
      break;
    }
  }
  report.final_energies = detail::energy(s, z, cfg);
  report.final_energy = report.final_energies.total;
  return {s.scatter(mask, z), report};
}

inline std::pair<HeightField, SolveReport> solve_fixed_volume(const DropMask& mask,
                                                              double target_volume,
                                                              const SolverParams& params,
                                                              const OpticalConfig& cfg,
                                                              const SweepObserver& observe = {}) {
  if (mask.area() <= 0) throw DomainError("solve_fixed_volume: empty mask");
  return solve_fixed_volume(init_mesh(mask, alpha_of_volume(mask, target_volume)),
                            target_volume, params, cfg, observe);
}

}  // namespace dropstereo
