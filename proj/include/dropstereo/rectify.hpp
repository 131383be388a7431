#pragma once

// Geometric rectification of a drop image: every traceable drop pixel is sent
// along its outbound ray to a fronto-parallel plane and the hit point is
// reprojected through the camera as if no drop were there. Intensities are
// divided by the Fresnel transmittance of both interfaces.

#include "dropstereo/core.hpp"
#include "dropstereo/raytrace.hpp"
#include "dropstereo/splat.hpp"
#include "dropstereo/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace dropstereo {

struct CompensatedImage {
  RasterGray image;
  PixelSet invalid;  // dark-band pixels (total reflection)
};

// Divides each traceable water pixel by its total transmittance. Pixels
// outside the drop are copied unchanged.
inline CompensatedImage compensate_illuminance(const RasterGray& image, const DropSurface& surface) {
  const auto& m = surface.mask();
  if (image.width() != m.width() || image.height() != m.height())
    throw DomainError("compensate_illuminance: image and drop sizes differ");
  CompensatedImage out{image, {Grid<std::uint8_t>(m.width(), m.height(), 0), 0}};
  m.for_each([&](int i, int j) {
    if (!surface.is_water(i, j)) return;
    const auto t = surface.trace(i, j);
    if (!t || !(t->transmittance > 0.0)) {
      out.invalid.bits(i, j) = 1;
      ++out.invalid.count;
      return;
    }
    out.image.set(i, j, image(i, j) / t->transmittance);
  });
  return out;
}

inline CompensatedImage compensate_illuminance(const RasterGray& image, const HeightField& hf,
                                               const OpticalConfig& cfg) {
  return compensate_illuminance(image, DropSurface(hf, cfg));
}

struct RectifyParams {
  int max_size = 1024;  // cap on either output side
  double max_tan = 0.5;  // rays more oblique than this are left out
  bool compensate = true;
};

struct RectifiedView {
  RasterGray raster;
  Grid<std::uint8_t> valid;
  Grid<float> transmittance;  // applied per output pixel (0 where invalid)
  double depth = 0.0;
  // Output pixel (r, c) shows image position (origin_i + r step, origin_j + c step)
  // of an undistorted view.
  double origin_i = 0.0, origin_j = 0.0, step = 1.0;
  double valid_fraction = 0.0;

  std::array<double, 2> to_image(double r, double c) const {
    return {origin_i + r * step, origin_j + c * step};
  }
  std::array<double, 2> to_raster(double fi, double fj) const {
    return {(fi - origin_i) / step, (fj - origin_j) / step};
  }
};

inline RectifiedView rectify_drop(const RasterGray& image, const DropSurface& surface, double depth,
                                  const RectifyParams& params = {}) {
  const auto& m = surface.mask();
  const auto& cfg = surface.config();
  if (image.width() != m.width() || image.height() != m.height())
    throw DomainError("rectify_drop: image and drop sizes differ");
  if (!(depth > surface.height_field().max_height()))
    throw DomainError("rectify_drop: plane depth must lie behind the drop");
  if (params.max_size < 2 || !(params.max_tan > 0.0))
    throw DomainError("rectify_drop: bad parameters");

  // Reprojected position, intensity and transmittance per drop pixel.
  const auto& b = m.box();
  Grid<double> pi(b.cols, b.rows, 0.0), pj(b.cols, b.rows, 0.0), tr(b.cols, b.rows, 0.0);
  Grid<std::uint8_t> ok(b.cols, b.rows, 0);
  double imin = std::numeric_limits<double>::infinity(), imax = -imin, jmin = imin, jmax = -imin;
  long n = 0;
  m.for_each([&](int i, int j) {
    if (!surface.is_water(i, j) || !surface.can_interpolate(i, j)) return;
    const auto t = surface.trace(i, j);
    if (!t || !(t->transmittance > 0.0)) return;
    const Vec3& d = t->outbound.direction;
    if (!(d.z() > 0.0) || std::abs(d.x() / d.z()) > params.max_tan ||
        std::abs(d.y() / d.z()) > params.max_tan)
      return;
    const Vec3 p = t->outbound.at((depth - t->outbound.origin.z()) / d.z());
    const auto px = project_scene_point(cfg, m.width(), m.height(), p);
    const int r = i - b.row0, c = j - b.col0;
    pi(r, c) = px[0];
    pj(r, c) = px[1];
    tr(r, c) = t->transmittance;
    ok(r, c) = 1;
    imin = std::min(imin, px[0]);
    imax = std::max(imax, px[0]);
    jmin = std::min(jmin, px[1]);
    jmax = std::max(jmax, px[1]);
    ++n;
  });
  if (n == 0) throw EmptyOutputError("rectify_drop: no traceable drop pixels");

  RectifiedView v;
  v.depth = depth;
  v.origin_i = std::floor(imin);
  v.origin_j = std::floor(jmin);
  const double span = std::max(imax - v.origin_i, jmax - v.origin_j);
  v.step = std::max(1.0, span / (params.max_size - 1));
  const int h = std::min(params.max_size, static_cast<int>(std::floor((imax - v.origin_i) / v.step)) + 1);
  const int w = std::min(params.max_size, static_cast<int>(std::floor((jmax - v.origin_j) / v.step)) + 1);
  v.raster = RasterGray(w, h, 0.0);
  v.valid = Grid<std::uint8_t>(w, h, 0);
  v.transmittance = Grid<float>(w, h, 0.0f);

  auto vertex = [&](int i, int j) -> std::optional<SplatVertex<2>> {
    if (!b.contains(i, j) || !ok(i - b.row0, j - b.col0)) return std::nullopt;
    const int r = i - b.row0, c = j - b.col0;
    const auto rc = v.to_raster(pi(r, c), pj(r, c));
    return SplatVertex<2>{rc[1], rc[0], {image(i, j), tr(r, c)}};
  };
  auto emit = [&](int r, int c, const std::array<double, 2>& p) {
    v.valid(r, c) = 1;
    v.transmittance(r, c) = static_cast<float>(p[1]);
    v.raster.set(r, c, params.compensate ? p[0] / p[1] : p[0]);
  };
  splat_grid<2>(b.row0, b.col0, b.rows, b.cols, w, h, vertex, emit);

  long covered = 0;
  for (auto x : v.valid.data()) covered += x;
  if (covered == 0) throw EmptyOutputError("rectify_drop: nothing covered");
  v.valid_fraction = static_cast<double>(covered) / (static_cast<double>(w) * h);
  return v;
}

inline RectifiedView rectify_drop(const RasterGray& image, const HeightField& hf,
                                  const OpticalConfig& cfg, double depth,
                                  const RectifyParams& params = {}) {
  return rectify_drop(image, DropSurface(hf, cfg), depth, params);
}

// Median of the valid triangulated depths.
inline RectifiedView rectify_drop(const RasterGray& image, const HeightField& hf,
                                  const OpticalConfig& cfg, const DepthResult& depth,
                                  const RectifyParams& params = {}) {
  const auto z = depth.valid_depths();
  if (z.empty()) throw EmptyOutputError("rectify_drop: depth result has no valid points");
  return rectify_drop(image, DropSurface(hf, cfg), median_of(z), params);
}

}  // namespace dropstereo
