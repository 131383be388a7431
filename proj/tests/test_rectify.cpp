#include "dropstereo/rectify.hpp"
#include "dropstereo/render.hpp"
#include "dropstereo/synthetic.hpp"

#include <gtest/gtest.h>

using namespace dropstereo;

TEST(Compensate, DividesByTransmittanceAndFlagsTheBand) {
  OpticalConfig cfg;
  const auto hf = synthetic::spherical_cap(121, 121, 60, 60, 50, 35);
  const DropSurface s(hf, cfg);
  const RasterGray img(121, 121, 0.4);
  const auto c = compensate_illuminance(img, s);
  EXPECT_EQ(c.invalid.count, dark_band_mask(s).count);
  EXPECT_GT(c.invalid.count, 0);
  hf.mask().for_each([&](int i, int j) {
    if (!s.is_water(i, j) || c.invalid.contains(i, j)) {
      EXPECT_DOUBLE_EQ(c.image(i, j), 0.4);
      return;
    }
    EXPECT_NEAR(c.image(i, j), std::min(1.0, 0.4 / s.trace(i, j)->transmittance), 1e-12);
  });
  EXPECT_DOUBLE_EQ(c.image(0, 0), 0.4);
  EXPECT_THROW(compensate_illuminance(RasterGray(10, 10), s), DomainError);
}

TEST(Rectify, RejectsPlaneInsideTheDrop) {
  OpticalConfig cfg;
  const auto hf = synthetic::spherical_cap(101, 101, 50, 50, 40, 20);
  EXPECT_THROW(rectify_drop(RasterGray(101, 101, 0.5), hf, cfg, 10.0), DomainError);
}

namespace {
struct Scene {
  SceneSpec spec;
  HeightField drop;
  RasterGray image;
};

Scene textured_drop_scene() {
  OpticalConfig cfg;
  const int W = 260;
  const auto m = DropMask::disk(W, W, 130, 130, 100);
  const double h = synthetic::cap_height(100, 0.3 * std::pow(static_cast<double>(m.area()), 1.5));
  const auto hf = synthetic::spherical_cap(W, W, 130, 130, 100, h);
  SceneSpec sc;
  sc.width = sc.height = W;
  sc.blur_radius = 0.0;
  ScenePlane pl;
  pl.depth = 2000;
  pl.texture = synthetic::value_noise(1000, 1000, 7.0, 3);
  pl.scale = 20;
  pl.offset_x = pl.offset_y = -10000;
  sc.planes.push_back(pl);
  return {sc, hf, render_synthetic(sc, {hf}, cfg)};
}

// ZNCC and mean absolute error against the camera's view of the plane with
// no drop, at the same image positions.
std::array<double, 2> score_against_truth(const RectifiedView& v, const SceneSpec& sc) {
  OpticalConfig cfg;
  const int W = sc.width;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0, err = 0;
  long n = 0;
  for (int r = 0; r < v.raster.height(); ++r)
    for (int c = 0; c < v.raster.width(); ++c) {
      if (!v.valid(r, c)) continue;
      const auto p = v.to_image(r, c);
      const Ray ray = camera_ray(cfg, W, W, p[0], p[1]);
      const double x = v.raster(r, c), y = hit_scene(sc, ray).intensity;
      sa += x;
      sb += y;
      saa += x * x;
      sbb += y * y;
      sab += x * y;
      err += std::abs(x - y);
      ++n;
    }
  if (n < 2) return {0.0, 1.0};
  const double cov = sab / n - sa / n * sb / n;
  const double zncc = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  return {zncc, err / n};
}
}  // namespace

TEST(Rectify, MatchesTheUndistortedView) {
  const auto s = textured_drop_scene();
  const auto v = rectify_drop(s.image, s.drop, OpticalConfig{}, 2000.0);
  EXPECT_GT(v.valid_fraction, 0.3);
  const auto score = score_against_truth(v, s.spec);
  EXPECT_GE(score[0], 0.95);
  EXPECT_LE(score[1], 0.03);
}

TEST(Rectify, TrueDepthScoresBestOverADepthSweep) {
  const auto s = textured_drop_scene();
  double best = -2.0, best_depth = 0.0;
  for (double f : {0.8, 0.9, 1.0, 1.1, 1.2}) {
    const auto v = rectify_drop(s.image, s.drop, OpticalConfig{}, 2000.0 * f);
    const double z = score_against_truth(v, s.spec)[0];
    if (z > best) {
      best = z;
      best_depth = 2000.0 * f;
    }
  }
  EXPECT_EQ(best_depth, 2000.0);
}

TEST(Rectify, FlatSlabIsTheIdentity) {
  // Parallel interfaces deflect nothing: the output is the input crop.
  OpticalConfig cfg;
  cfg.camera_at_infinity = true;
  const auto m = DropMask::disk(120, 120, 60, 60, 45);
  const HeightField slab(m, 4.0);
  const auto img = synthetic::value_noise(120, 120, 5.0, 2);
  RectifyParams p;
  p.compensate = false;
  p.max_tan = 2.0;
  const auto v = rectify_drop(img, slab, cfg, 1500.0, p);
  EXPECT_DOUBLE_EQ(v.step, 1.0);
  long n = 0;
  for (int r = 0; r < v.raster.height(); ++r)
    for (int c = 0; c < v.raster.width(); ++c) {
      if (!v.valid(r, c)) continue;
      const auto q = v.to_image(r, c);
      EXPECT_NEAR(v.raster(r, c), img.sample(q[0], q[1]), 1e-6);
      ++n;
    }
  EXPECT_GT(n, 5000);
}
