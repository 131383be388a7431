#pragma once

// Procedural textures and drop outlines for synthetic scenes.

#include "dropstereo/core.hpp"
#include "dropstereo/solver.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dropstereo::synthetic {

inline RasterGray checkerboard(int width, int height, double square, double lo = 0.1,
                               double hi = 0.9) {
  RasterGray t(width, height);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const long a = static_cast<long>(std::floor(i / square));
      const long b = static_cast<long>(std::floor(j / square));
      t.set(i, j, ((a + b) % 2 == 0) ? hi : lo);
    }
  return t;
}

// Vertical step at column `edge_col` with a linear ramp `ramp` texels wide.
inline RasterGray step_edge(int width, int height, double edge_col, double ramp, double lo = 0.15,
                            double hi = 0.85) {
  RasterGray t(width, height);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const double s = std::clamp((j - edge_col) / ramp + 0.5, 0.0, 1.0);
      t.set(i, j, lo + (hi - lo) * s);
    }
  return t;
}

// Sum of bilinear value-noise octaves rescaled to [lo, hi].
inline RasterGray value_noise(int width, int height, double cell, std::uint32_t seed,
                              double lo = 0.2, double hi = 0.9, int octaves = 3) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Grid<double> acc(width, height, 0.0);
  double amp = 1.0, total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const double c = std::max(1.0, cell / std::pow(2.0, o));
    const int gw = static_cast<int>(std::ceil(width / c)) + 2;
    const int gh = static_cast<int>(std::ceil(height / c)) + 2;
    Grid<double> lattice(gw, gh);
    for (double& v : lattice.data()) v = uni(rng);
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        const double fi = i / c, fj = j / c;
        const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
        const double a = fi - i0, b = fj - j0;
        const double v = (1 - a) * ((1 - b) * lattice(i0, j0) + b * lattice(i0, j0 + 1)) +
                         a * ((1 - b) * lattice(i0 + 1, j0) + b * lattice(i0 + 1, j0 + 1));
        acc(i, j) += amp * v;
      }
    total += amp;
    amp *= 0.5;
  }
  RasterGray t(width, height);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) t.set(i, j, lo + (hi - lo) * acc(i, j) / total);
  return t;
}

// Star-shaped outline r(theta) = R (1 + sum_k a_k cos(k theta + phi_k)),
// k = 2..4, with amplitudes drawn up to `irregularity`.
inline DropMask irregular_mask(int width, int height, double ci, double cj, double radius,
                               double irregularity, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(0.0, irregularity);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  double a[5] = {0, 0, 0, 0, 0}, ph[5] = {0, 0, 0, 0, 0};
  for (int k = 2; k <= 4; ++k) {
    a[k] = amp(rng) / (k - 1);
    ph[k] = phase(rng);
  }
  return DropMask::from_predicate(width, height, [&](int i, int j) {
    const double dy = i - ci, dx = j - cj;
    const double th = std::atan2(dy, dx);
    double r = 1.0;
    for (int k = 2; k <= 4; ++k) r += a[k] * std::cos(k * th + ph[k]);
    return std::hypot(dx, dy) <= radius * r;
  });
}

// Height of a spherical cap over a disk of radius a holding volume V:
// V = pi h (3 a^2 + h^2) / 6, solved by Newton from h = 2V / (pi a^2).
inline double cap_height(double a, double volume) {
  if (!(a > 0.0) || !(volume > 0.0)) throw DomainError("cap_height: need a > 0 and V > 0");
  double h = 2.0 * volume / (M_PI * a * a);
  for (int it = 0; it < 100; ++it) {
    const double f = M_PI * h * (3 * a * a + h * h) / 6.0 - volume;
    const double step = f / (M_PI * (a * a + h * h) / 2.0);
    h -= step;
    if (std::abs(step) < 1e-14 * h) break;
  }
  return h;
}

// Analytic spherical cap of base radius a centred at (ci, cj), sampled at
// pixel centres; rim pixels of the disk mask are set to 0.
inline HeightField spherical_cap(int width, int height, double ci, double cj, double a, double h) {
  const DropMask mask = DropMask::disk(width, height, ci, cj, a);
  const double rs = (a * a + h * h) / (2.0 * h);
  HeightField hf(mask);
  mask.for_each([&](int i, int j) {
    const double r2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
    const double z = std::sqrt(std::max(0.0, rs * rs - r2)) - (rs - h);
    hf.set(i, j, mask.on_rim(i, j) ? 0.0 : std::max(0.0, z));
  });
  return hf;
}

// Ground-truth drop: converged minimum-energy surface at volume alpha B^{3/2}.
inline SolverParams ground_truth_params() {
  SolverParams p;
  p.max_iters = 40000;
  p.convergence_rel = 1e-8;
  return p;
}

inline HeightField make_drop(const DropMask& mask, double alpha, const OpticalConfig& cfg,
                             SolverParams params = ground_truth_params()) {
  return solve_fixed_volume(mask, initial_volume(mask, alpha), params, cfg).first;
}

}  // namespace dropstereo::synthetic
