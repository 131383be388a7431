#pragma once

// Angular dewarping: each drop pixel is moved to the perspective division
// (r_x / r_z, r_y / r_z) of its outbound ray, and the drop image is resampled
// on a regular grid in that angular space. The map from pixels to directions
// is one-to-one on a convex drop, so the resampled grid also keeps a table
// back to warped pixel positions.

#include "dropstereo/core.hpp"
#include "dropstereo/raytrace.hpp"
#include "dropstereo/splat.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace dropstereo {

// Angular coordinates of every traceable water pixel of one drop.
struct ForwardMap {
  PixelBox box;
  Grid<double> u, v;  // bounding-box local
  Grid<std::uint8_t> valid;
  long count = 0;

  bool is_valid(int i, int j) const {
    return box.contains(i, j) && valid(i - box.row0, j - box.col0) != 0;
  }
  std::array<double, 2> at(int i, int j) const {
    return {u(i - box.row0, j - box.col0), v(i - box.row0, j - box.col0)};
  }
};

// Directions with |tan| beyond `max_tan` (grazing rays next to the dark band)
// are dropped.
inline ForwardMap forward_map(const DropSurface& surface, double max_tan = 2.0) {
  if (!(max_tan > 0.0)) throw DomainError("forward_map: max_tan must be positive");
  const auto& b = surface.mask().box();
  ForwardMap fm{b, Grid<double>(b.cols, b.rows, 0.0), Grid<double>(b.cols, b.rows, 0.0),
                Grid<std::uint8_t>(b.cols, b.rows, 0), 0};
  surface.mask().for_each([&](int i, int j) {
    if (!surface.is_water(i, j) || !surface.can_interpolate(i, j)) return;
    const auto t = surface.trace(i, j);
    if (!t || !(t->outbound.direction.z() > 0.0)) return;
    const auto uv = angular_project(t->outbound);
    if (std::abs(uv[0]) > max_tan || std::abs(uv[1]) > max_tan) return;
    fm.u(i - b.row0, j - b.col0) = uv[0];
    fm.v(i - b.row0, j - b.col0) = uv[1];
    fm.valid(i - b.row0, j - b.col0) = 1;
    ++fm.count;
  });
  return fm;
}

struct AngularWindow {
  double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0;
};

// Bounding window of every valid direction over one or more drops.
inline AngularWindow angular_window(const std::vector<const ForwardMap*>& maps) {
  AngularWindow w{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  long n = 0;
  for (const ForwardMap* fm : maps)
    for (int r = 0; r < fm->box.rows; ++r)
      for (int c = 0; c < fm->box.cols; ++c) {
        if (!fm->valid(r, c)) continue;
        w.u_min = std::min(w.u_min, fm->u(r, c));
        w.u_max = std::max(w.u_max, fm->u(r, c));
        w.v_min = std::min(w.v_min, fm->v(r, c));
        w.v_max = std::max(w.v_max, fm->v(r, c));
        ++n;
      }
  if (n == 0) throw EmptyOutputError("angular_window: no valid directions");
  return w;
}

struct DewarpResult {
  RasterGray image;
  Grid<std::uint8_t> valid;
  Grid<double> src_i, src_j;  // warped pixel position per output pixel
  AngularWindow window;
  double step = 1.0;  // angular units per output pixel, both axes
  long positive_jacobian = 0, negative_jacobian = 0;  // triangle counts

  int width() const { return image.width(); }
  int height() const { return image.height(); }
  long valid_count() const {
    long n = 0;
    for (auto b : valid.data()) n += b;
    return n;
  }

  // Output pixel position of an angular coordinate.
  std::array<double, 2> to_pixel(double u, double v) const {
    return {(v - window.v_min) / step, (u - window.u_min) / step};
  }
  std::array<double, 2> to_angle(double r, double c) const {
    return {window.u_min + c * step, window.v_min + r * step};
  }

  // Warped position behind a fractional output position: bilinear in the
  // table when all four neighbours are valid, else the nearest valid one.
  std::optional<std::array<double, 2>> source_at(double r, double c) const {
    const int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
    const double a = r - r0, b = c - c0;
    auto ok = [&](int rr, int cc) { return valid.in_bounds(rr, cc) && valid(rr, cc) != 0; };
    if (ok(r0, c0) && ok(r0, c0 + 1) && ok(r0 + 1, c0) && ok(r0 + 1, c0 + 1)) {
      auto lerp = [&](const Grid<double>& g) {
        return (1 - a) * ((1 - b) * g(r0, c0) + b * g(r0, c0 + 1)) +
               a * ((1 - b) * g(r0 + 1, c0) + b * g(r0 + 1, c0 + 1));
      };
      return std::array<double, 2>{lerp(src_i), lerp(src_j)};
    }
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::array<double, 2>> out;
    for (int rr = r0; rr <= r0 + 1; ++rr)
      for (int cc = c0; cc <= c0 + 1; ++cc) {
        if (!ok(rr, cc)) continue;
        const double d = (rr - r) * (rr - r) + (cc - c) * (cc - c);
        if (d < best) {
          best = d;
          out = std::array<double, 2>{src_i(rr, cc), src_j(rr, cc)};
        }
      }
    return out;
  }
};

// Output size for a window at `resolution` pixels along its longer side.
inline double window_step(const AngularWindow& w, int resolution) {
  if (resolution < 2) throw DomainError("dewarp: resolution must be >= 2");
  const double span = std::max(w.u_max - w.u_min, w.v_max - w.v_min);
  if (!(span > 0.0)) throw EmptyOutputError("dewarp: angular window has zero extent");
  return span / (resolution - 1);
}

inline DewarpResult dewarp(const RasterGray& image, const DropSurface& surface,
                           const ForwardMap& fm, const AngularWindow& window, int resolution) {
  if (image.width() != surface.mask().width() || image.height() != surface.mask().height())
    throw DomainError("dewarp: image and drop sizes differ");
  if (fm.count == 0) throw EmptyOutputError("dewarp: drop has no traceable pixels");
  DewarpResult out;
  out.window = window;
  out.step = window_step(window, resolution);
  const int w = static_cast<int>(std::floor((window.u_max - window.u_min) / out.step + 1e-9)) + 1;
  const int h = static_cast<int>(std::floor((window.v_max - window.v_min) / out.step + 1e-9)) + 1;
  out.image = RasterGray(w, h, 0.0);
  out.valid = Grid<std::uint8_t>(w, h, 0);
  out.src_i = Grid<double>(w, h, 0.0);
  out.src_j = Grid<double>(w, h, 0.0);

  auto vertex = [&](int i, int j) -> std::optional<SplatVertex<3>> {
    if (!fm.is_valid(i, j)) return std::nullopt;
    const auto uv = fm.at(i, j);
    const auto px = out.to_pixel(uv[0], uv[1]);
    return SplatVertex<3>{px[1], px[0], {double(i), double(j), image(i, j)}};
  };
  auto emit = [&](int r, int c, const std::array<double, 3>& p) {
    out.valid(r, c) = 1;
    out.src_i(r, c) = p[0];
    out.src_j(r, c) = p[1];
    out.image.set(r, c, p[2]);
  };
  const auto signs =
      splat_grid<3>(fm.box.row0, fm.box.col0, fm.box.rows, fm.box.cols, w, h, vertex, emit);
  out.positive_jacobian = signs[0];
  out.negative_jacobian = signs[1];
  if (out.valid_count() == 0) throw EmptyOutputError("dewarp: no output pixel covered");
  return out;
}

// Single-drop dewarp over the drop's own angular window.
inline DewarpResult dewarp_image(const RasterGray& image, const HeightField& hf,
                                 const OpticalConfig& cfg, int resolution = 256,
                                 double max_tan = 2.0) {
  const DropSurface surface(hf, cfg);
  const ForwardMap fm = forward_map(surface, max_tan);
  if (fm.count == 0) throw EmptyOutputError("dewarp_image: drop has no traceable pixels");
  return dewarp(image, surface, fm, angular_window({&fm}), resolution);
}

}  // namespace dropstereo
