#pragma once

// Refraction, Fresnel transmittance and the total-reflection (dark band)
// predicate, plus the equivalent camera that folds the flat air-water
// interface into a shifted pinhole.

#include "dropstereo/core.hpp"

#include <cmath>
#include <optional>

namespace dropstereo {

struct FresnelResult {
  double Ts = 0.0;
  double Tp = 0.0;
  double T = 0.0;
};

// Refracts a unit direction at an interface with unit normal `normal` (either
// orientation). The component of `dir` tangential to the interface is scaled
// by eta_ratio = n_from / n_to. Returns nullopt on total internal reflection.
inline std::optional<Vec3> refract(const Vec3& dir, const Vec3& normal, double eta_ratio) {
  if (!is_unit(dir, 1e-6) || !is_unit(normal, 1e-6))
    throw DomainError("refract: direction and normal must be unit vectors");
  const double cos_i = dir.dot(normal);
  const Vec3 tangential = eta_ratio * (dir - cos_i * normal);
  const double t2 = tangential.squaredNorm();
  if (t2 > 1.0 + 1e-12) return std::nullopt;
  const double along = std::sqrt(std::max(0.0, 1.0 - t2));
  const double side = cos_i >= 0.0 ? 1.0 : -1.0;
  return (tangential + side * along * normal).normalized();
}

// Unpolarised transmittance for light crossing an air/water interface with
// air-side angle theta_a. Symmetric in the direction of travel.
inline FresnelResult fresnel_transmittance(double theta_a, double n_a, double n_w) {
  if (!(theta_a >= 0.0) || !(theta_a < M_PI / 2))
    throw DomainError("fresnel_transmittance: theta_a must lie in [0, pi/2)");
  if (!(n_a > 0.0) || !(n_w > 0.0)) throw DomainError("fresnel_transmittance: bad indices");
  FresnelResult r;
  if (theta_a < 1e-9) {
    r.Ts = r.Tp = r.T = 4.0 * n_a * n_w / ((n_w + n_a) * (n_w + n_a));
    return r;
  }
  const double theta_w = std::asin(std::clamp(n_a * std::sin(theta_a) / n_w, -1.0, 1.0));
  const double sum = theta_w + theta_a, diff = theta_w - theta_a;
  const double rs = std::sin(diff) / std::sin(sum);
  r.Ts = 1.0 - rs * rs;
  // tan(sum) is infinite at Brewster's angle.
  if (std::abs(std::cos(sum)) < 1e-12) {
    r.Tp = 1.0;
  } else {
    const double rp = std::tan(diff) / std::tan(sum);
    r.Tp = 1.0 - rp * rp;
  }
  r.Ts = std::clamp(r.Ts, 0.0, 1.0);
  r.Tp = std::clamp(r.Tp, 0.0, 1.0);
  r.T = 0.5 * (r.Ts + r.Tp);
  return r;
}

// Transmittance of a ray leaving water with water-side angle theta_w.
// Returns 0 past the critical angle.
inline double transmittance_from_water(double theta_w, double n_a, double n_w) {
  const double s = n_w * std::sin(theta_w) / n_a;
  if (s >= 1.0) return 0.0;
  return fresnel_transmittance(std::asin(s), n_a, n_w).T;
}

// Linearised transmittance just above the critical normal: 7.68 (N_z - N_crit).
inline double band_transmittance_linear(double n_z, double n_crit) {
  if (n_z < n_crit) return 0.0;
  return std::clamp(7.68 * (n_z - n_crit), 0.0, 1.0);
}

// Mean linearised transmittance over the band |N_z - N_crit| <= halfwidth:
// 3.84 * halfwidth.
inline double band_mean_transmittance_linear(double halfwidth) { return 3.84 * halfwidth; }

inline constexpr double kDefaultBandHalfwidth = 0.02 * M_PI;

// cos(asin(n_a / n_w) + theta_cprime); 0 once the angle reaches pi/2.
inline double critical_normal_z(double theta_cprime, double n_a, double n_w) {
  if (!(theta_cprime >= 0.0) || !(theta_cprime < M_PI / 2))
    throw DomainError("critical_normal_z: theta_C' must lie in [0, pi/2)");
  if (!(n_a > 0.0) || !(n_w >= n_a)) throw DomainError("critical_normal_z: need n_w >= n_a > 0");
  const double angle = std::asin(n_a / n_w) + theta_cprime;
  if (angle >= M_PI / 2) return 0.0;
  return std::cos(angle);
}

struct DarkBandParams {
  double n_crit = 0.0;
  double halfwidth = kDefaultBandHalfwidth;
  double theta_cprime = 0.0;

  static DarkBandParams make(double theta_cprime, double n_a, double n_w,
                             double halfwidth = kDefaultBandHalfwidth) {
    if (!(halfwidth > 0.0)) throw DomainError("DarkBandParams: halfwidth must be positive");
    return {critical_normal_z(theta_cprime, n_a, n_w), halfwidth, theta_cprime};
  }
};

// Equivalent camera for a camera at C (C.z > 0 above the plate z = 0) and a
// plate point x: C' = (C.x, C.y, (n_w/n_a) z_c sqrt(1 + (n_w^2 - n_a^2)/n_w^2 *
// r^2 / z_c^2)), r measured from the camera axis. Rays leaving C' travel in
// straight lines through the water exactly as the refracted camera rays do.
inline Vec3 equivalent_camera(const Vec3& camera, const Vec3& x_plate, double n_a, double n_w,
                              bool paraxial = false) {
  const double zc = camera.z();
  if (!(zc > 0.0)) throw DomainError("equivalent_camera: camera height must be positive");
  const double ratio = n_w / n_a;
  if (paraxial) return {camera.x(), camera.y(), ratio * zc};
  const double dx = x_plate.x() - camera.x(), dy = x_plate.y() - camera.y();
  const double r2 = dx * dx + dy * dy;
  const double k = (n_w * n_w - n_a * n_a) / (n_w * n_w);
  return {camera.x(), camera.y(), ratio * zc * std::sqrt(1.0 + k * r2 / (zc * zc))};
}

}  // namespace dropstereo
