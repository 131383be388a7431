#pragma once

// Forward synthetic renderer. Background pixels see the scene straight
// through the glass and are blurred (the camera focuses on the drops); drop
// pixels follow the inverse-traced refracted ray, are attenuated by the
// Fresnel transmittance of both interfaces, and fall to an ambient leak level
// inside the dark band.

#include "dropstereo/core.hpp"
#include "dropstereo/raytrace.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dropstereo {

struct ScenePlane {
  double depth = 2000.0;  // z of the plane, pixels
  RasterGray texture;
  std::string texture_path;  // informational, set when loaded from disk
  double scale = 1.0;        // scene units per texel
  double offset_x = 0.0;     // scene x of texel column 0
  double offset_y = 0.0;     // scene y of texel row 0
  // The plane only exists for x in [x_min, x_max).
  double x_min = -std::numeric_limits<double>::infinity();
  double x_max = std::numeric_limits<double>::infinity();
};

struct SceneSpec {
  int width = 0, height = 0;  // rendered image size
  std::vector<ScenePlane> planes;
  double blur_radius = 3.0;  // Gaussian sigma for the out-of-focus background
  double leak = 0.02;        // intensity of totally reflecting pixels
  double border = 0.5;       // intensity of rays missing every texture

  void validate(double max_drop_height = 0.0) const {
    if (width <= 0 || height <= 0) throw DomainError("SceneSpec: image size must be positive");
    if (planes.empty()) throw DomainError("SceneSpec: at least one plane required");
    for (const auto& p : planes) {
      if (!(p.depth > max_drop_height))
        throw DomainError("SceneSpec: plane must lie behind every drop");
      if (!(p.scale > 0.0)) throw DomainError("SceneSpec: texture scale must be positive");
      if (p.texture.width() <= 0) throw DomainError("SceneSpec: plane without texture");
    }
    if (!(blur_radius >= 0.0)) throw DomainError("SceneSpec: blur radius must be >= 0");
    if (!(leak >= 0.0 && leak <= 1.0)) throw DomainError("SceneSpec: leak must lie in [0, 1]");
  }
};

struct SceneHit {
  Vec3 point;
  double intensity = 0.0;
  int plane = -1;
};

// Nearest plane hit along a ray; the border value when nothing is hit.
inline SceneHit hit_scene(const SceneSpec& scene, const Ray& ray) {
  SceneHit best;
  best.intensity = scene.border;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < scene.planes.size(); ++k) {
    const auto& pl = scene.planes[k];
    if (ray.direction.z() <= 0.0) continue;
    const double t = (pl.depth - ray.origin.z()) / ray.direction.z();
    if (!(t > 0.0) || t >= best_t) continue;
    const Vec3 p = ray.at(t);
    if (p.x() < pl.x_min || p.x() >= pl.x_max) continue;
    best_t = t;
    best.point = p;
    best.plane = static_cast<int>(k);
    const double tj = (p.x() - pl.offset_x) / pl.scale;
    const double ti = (p.y() - pl.offset_y) / pl.scale;
    if (ti < 0.0 || tj < 0.0 || ti > pl.texture.height() - 1 || tj > pl.texture.width() - 1)
      best.intensity = scene.border;
    else
      best.intensity = pl.texture.sample(ti, tj);
  }
  return best;
}

inline RasterGray gaussian_blur(const RasterGray& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int t = -r; t <= r; ++t) sum += k[t + r] = std::exp(-0.5 * t * t / (sigma * sigma));
  for (double& v : k) v /= sum;
  const int w = in.width(), h = in.height();
  Grid<double> tmp(w, h, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * in(i, std::clamp(j + t, 0, w - 1));
      tmp(i, j) = acc;
    }
  RasterGray out(w, h);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp(std::clamp(i + t, 0, h - 1), j);
      out.set(i, j, acc);
    }
  return out;
}

// Sharp view of the scene through bare glass.
inline RasterGray render_background(const SceneSpec& scene, const OpticalConfig& cfg) {
  RasterGray bg(scene.width, scene.height);
  for (int i = 0; i < scene.height; ++i)
    for (int j = 0; j < scene.width; ++j)
      bg.set(i, j, hit_scene(scene, camera_ray(cfg, scene.width, scene.height, i, j)).intensity);
  return bg;
}

// Per-pixel scene depth (z of the first hit) seen through the drops; NaN
// outside water pixels and inside the dark band.
struct RenderOutput {
  RasterGray image;
  std::vector<Grid<float>> drop_depth;  // one full-size map per drop
};

inline RenderOutput render_synthetic_full(const SceneSpec& scene,
                                          const std::vector<HeightField>& drops,
                                          const OpticalConfig& cfg) {
  double hmax = 0.0;
  for (const auto& d : drops) {
    if (d.width() != scene.width || d.height() != scene.height)
      throw DomainError("render_synthetic: drop grid does not match the scene size");
    hmax = std::max(hmax, d.max_height());
  }
  scene.validate(hmax);
  cfg.validate();

  RenderOutput out;
  out.image = gaussian_blur(render_background(scene, cfg), scene.blur_radius);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (const auto& d : drops) {
    DropSurface surface(d, cfg);
    Grid<float> depth(scene.width, scene.height, nan);
    d.mask().for_each([&](int i, int j) {
      if (!surface.is_water(i, j)) return;
      const auto t = surface.trace(i, j);
      if (!t) {
        out.image.set(i, j, scene.leak);
        return;
      }
      const SceneHit hit = hit_scene(scene, t->outbound);
      out.image.set(i, j, hit.intensity * t->transmittance);
      if (hit.plane >= 0) depth(i, j) = static_cast<float>(hit.point.z());
    });
    out.drop_depth.push_back(std::move(depth));
  }
  return out;
}

inline RasterGray render_synthetic(const SceneSpec& scene, const std::vector<HeightField>& drops,
                                   const OpticalConfig& cfg) {
  return render_synthetic_full(scene, drops, cfg).image;
}

}  // namespace dropstereo
