#pragma once

// Inverse raytracing through a reconstructed drop, angular dewarping and the
// forward renderer used to synthesise ground truth.
//
// Frame: plate at z = 0, camera at (0, 0, -camera_z) on the optical axis
// through the principal point, drop and scene at z > 0. The flat air-water
// refraction is folded into the equivalent camera C', so each pixel sees a
// straight in-water ray from C' to the surface point above its column and one
// refraction at the curved surface. Image pixel (i, j) is identified with the
// refraction column (i, j).

#include "dropstereo/core.hpp"
#include "dropstereo/optics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace dropstereo {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  Vec3 at(double t) const { return origin + t * direction; }
};

// Everything known about the light path through one drop pixel.
struct TracedPixel {
  Ray outbound;            // anchored at the surface point x
  Vec3 incident;           // unit in-water direction R_i
  Vec3 normal;             // unit surface normal (+z hemisphere)
  Vec3 plate_hit;          // where the camera ray crosses the plate
  double theta_cprime = 0; // angle between R_i and the z axis
  double transmittance = 0;  // flat and curved interfaces combined
};

inline double angle_from_axis(const Vec3& dir) {
  return std::acos(std::clamp(dir.z(), -1.0, 1.0));
}

// Straight in-water ray from C' to the surface point x. Returns the unit
// direction and the plate crossing. With the exact camera model the plate
// crossing (and hence C') is found by fixed-point iteration.
struct InWaterRay {
  Vec3 direction;
  Vec3 plate_hit;
  Vec3 cprime;
};

inline InWaterRay in_water_ray(const OpticalConfig& cfg, const Vec3& x) {
  if (cfg.camera_at_infinity) return {Vec3::UnitZ(), Vec3(x.x(), x.y(), 0.0), Vec3::Zero()};
  const Vec3 camera(0.0, 0.0, cfg.camera_z);
  Vec3 p(x.x(), x.y(), 0.0);
  Vec3 cp;
  for (int it = 0; it < 50; ++it) {
    const Vec3 e = equivalent_camera(camera, p, cfg.n_air, cfg.n_water, cfg.paraxial_camera);
    cp = Vec3(0.0, 0.0, -e.z());
    const double k = e.z();
    const Vec3 next(x.x() * k / (x.z() + k), x.y() * k / (x.z() + k), 0.0);
    const double moved = (next - p).norm();
    p = next;
    if (cfg.paraxial_camera || moved < 1e-13) break;
  }
  return {(x - cp).normalized(), p, cp};
}

// Air-side transmittance of the camera ray crossing the flat plate at p.
inline double plate_transmittance(const OpticalConfig& cfg, const Vec3& p) {
  const double theta_a =
      cfg.camera_at_infinity ? 0.0 : std::atan2(std::hypot(p.x(), p.y()), cfg.camera_z);
  return fresnel_transmittance(theta_a, cfg.n_air, cfg.n_water).T;
}

// Camera ray through pixel (fi, fj) that crosses the glass without a drop.
inline Ray camera_ray(const OpticalConfig& cfg, int width, int height, double fi, double fj) {
  const Vec3 p = plate_point(cfg, width, height, fi, fj);
  if (cfg.camera_at_infinity) return {p, Vec3::UnitZ()};
  const Vec3 c(0.0, 0.0, -cfg.camera_z);
  return {p, (p - c).normalized()};
}

// Image pixel at which a scene point appears when no drop is in the way.
inline std::array<double, 2> project_scene_point(const OpticalConfig& cfg, int width, int height,
                                                 const Vec3& point) {
  if (cfg.camera_at_infinity) return plate_to_pixel(cfg, width, height, point.x(), point.y());
  const double s = cfg.camera_z / (point.z() + cfg.camera_z);
  return plate_to_pixel(cfg, width, height, point.x() * s, point.y() * s);
}

// Precomputed normals for one reconstructed drop; the unit of inverse
// raytracing. Cheap to copy relative to tracing work, immutable after
// construction.
class DropSurface {
 public:
  DropSurface(HeightField hf, OpticalConfig cfg) : hf_(std::move(hf)), cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto& b = hf_.mask().box();
    nx_ = Grid<double>(b.cols, b.rows, 0.0);
    ny_ = nx_;
    nz_ = Grid<double>(b.cols, b.rows, 1.0);
    hf_.mask().for_each([&](int i, int j) {
      const Vec3 n = surface_normal(hf_, i, j);
      nx_(i - b.row0, j - b.col0) = n.x();
      ny_(i - b.row0, j - b.col0) = n.y();
      nz_(i - b.row0, j - b.col0) = n.z();
    });
  }

  const HeightField& height_field() const { return hf_; }
  const OpticalConfig& config() const { return cfg_; }
  const DropMask& mask() const { return hf_.mask(); }

  // Water pixels carry positive height; the pinned contact line does not.
  bool is_water(int i, int j) const { return hf_.mask().contains(i, j) && hf_(i, j) > 0.0; }

  Vec3 normal(int i, int j) const {
    if (!hf_.mask().contains(i, j)) throw DomainError("DropSurface::normal: pixel outside mask");
    const auto& b = hf_.mask().box();
    return {nx_(i - b.row0, j - b.col0), ny_(i - b.row0, j - b.col0),
            nz_(i - b.row0, j - b.col0)};
  }

  Vec3 surface_point(double fi, double fj) const {
    const Vec3 p = plate_point(cfg_, hf_.width(), hf_.height(), fi, fj);
    return {p.x(), p.y(), hf_.interpolate(fi, fj)};
  }

  // Fractional positions need all four surrounding pixels in the mask.
  bool can_interpolate(double fi, double fj) const {
    const int i0 = static_cast<int>(std::floor(fi)), j0 = static_cast<int>(std::floor(fj));
    const bool exact_i = fi == i0, exact_j = fj == j0;
    const auto& m = hf_.mask();
    return m.contains(i0, j0) && (exact_j || m.contains(i0, j0 + 1)) &&
           (exact_i || m.contains(i0 + 1, j0)) &&
           (exact_i || exact_j || m.contains(i0 + 1, j0 + 1));
  }

  Vec3 interpolated_normal(double fi, double fj) const {
    const int i0 = static_cast<int>(std::floor(fi)), j0 = static_cast<int>(std::floor(fj));
    const double a = fi - i0, b = fj - j0;
    Vec3 n = Vec3::Zero();
    auto add = [&](int i, int j, double w) {
      if (w != 0.0) n += w * normal(i, j);
    };
    add(i0, j0, (1 - a) * (1 - b));
    add(i0, j0 + 1, (1 - a) * b);
    add(i0 + 1, j0, a * (1 - b));
    add(i0 + 1, j0 + 1, a * b);
    return n.normalized();
  }

  // Angle theta_C' of the in-water ray at a pixel.
  double theta_cprime(int i, int j) const {
    return angle_from_axis(in_water_ray(cfg_, surface_point(i, j)).direction);
  }

  double critical_nz(int i, int j) const {
    return critical_normal_z(std::min(theta_cprime(i, j), M_PI / 2 - 1e-12), cfg_.n_air,
                             cfg_.n_water);
  }

  // Inverse raytrace at a (possibly fractional) pixel. nullopt means total
  // internal reflection at the curved surface.
  std::optional<TracedPixel> trace(double fi, double fj) const {
    if (!can_interpolate(fi, fj)) throw DomainError("trace: pixel outside the drop mask");
    const Vec3 x = surface_point(fi, fj);
    const InWaterRay w = in_water_ray(cfg_, x);
    const Vec3 n = interpolated_normal(fi, fj);
    const auto out = refract(w.direction, n, cfg_.n_water / cfg_.n_air);
    if (!out) return std::nullopt;
    TracedPixel t;
    t.outbound = {x, *out};
    t.incident = w.direction;
    t.normal = n;
    t.plate_hit = w.plate_hit;
    t.theta_cprime = angle_from_axis(w.direction);
    const double theta_w = std::acos(std::clamp(w.direction.dot(n), -1.0, 1.0));
    t.transmittance =
        plate_transmittance(cfg_, w.plate_hit) *
        transmittance_from_water(theta_w, cfg_.n_air, cfg_.n_water);
    return t;
  }

 private:
  HeightField hf_;
  OpticalConfig cfg_;
  Grid<double> nx_, ny_, nz_;
};

inline std::optional<TracedPixel> trace_drop_pixel(const DropSurface& surface, int i, int j) {
  return surface.trace(i, j);
}

// Perspective division of the ray direction: (r_x / r_z, r_y / r_z).
inline std::array<double, 2> angular_project(const Ray& r) {
  if (!(r.direction.z() > 0.0))
    throw DomainError("angular_project: ray does not proceed toward the scene");
  return {r.direction.x() / r.direction.z(), r.direction.y() / r.direction.z()};
}

// Pixel set over an image; unlike DropMask it need not be connected.
struct PixelSet {
  Grid<std::uint8_t> bits;
  long count = 0;

  bool contains(int i, int j) const { return bits.in_bounds(i, j) && bits(i, j) != 0; }
};

// Pixels whose normal z component is at or below the critical value for the
// local theta_C'. Only water pixels (z > 0) can be dark.
inline PixelSet dark_band_mask(const DropSurface& surface) {
  const auto& m = surface.mask();
  PixelSet band{Grid<std::uint8_t>(m.width(), m.height(), 0), 0};
  m.for_each([&](int i, int j) {
    if (surface.is_water(i, j) && surface.normal(i, j).z() <= surface.critical_nz(i, j)) {
      band.bits(i, j) = 1;
      ++band.count;
    }
  });
  return band;
}

}  // namespace dropstereo
