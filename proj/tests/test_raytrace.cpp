#include "dropstereo/dewarp.hpp"
#include "dropstereo/raytrace.hpp"
#include "dropstereo/render.hpp"
#include "dropstereo/splat.hpp"
#include "dropstereo/synthetic.hpp"

#include <gtest/gtest.h>

using namespace dropstereo;

namespace {
HeightField cap(int size, double R, double alpha) {
  const auto m = DropMask::disk(size, size, size / 2, size / 2, R);
  const double V = alpha * std::pow(static_cast<double>(m.area()), 1.5);
  return synthetic::spherical_cap(size, size, size / 2, size / 2, R, synthetic::cap_height(R, V));
}
}  // namespace

TEST(Camera, ProjectionInvertsCameraRay) {
  OpticalConfig cfg;
  for (double fi : {3.0, 50.5, 97.0})
    for (double fj : {0.0, 61.25, 120.0}) {
      const Ray r = camera_ray(cfg, 121, 101, fi, fj);
      const auto px = project_scene_point(cfg, 121, 101, r.at(1234.5));
      EXPECT_NEAR(px[0], fi, 1e-9);
      EXPECT_NEAR(px[1], fj, 1e-9);
    }
}

TEST(Trace, FlatSlabLeavesCameraRayDirectionUnchanged) {
  // Parallel interfaces: two refractions cancel.
  OpticalConfig cfg;
  const auto m = DropMask::disk(101, 101, 50, 50, 40);
  const HeightField hf(m, 5.0);
  const DropSurface s(hf, cfg);
  for (int i : {30, 50, 70})
    for (int j : {35, 50, 65}) {
      const auto t = s.trace(i, j);
      ASSERT_TRUE(t);
      // Camera ray through the plate point where the in-water ray enters.
      const auto px = plate_to_pixel(cfg, 101, 101, t->plate_hit.x(), t->plate_hit.y());
      const Ray cam = camera_ray(cfg, 101, 101, px[0], px[1]);
      EXPECT_NEAR((t->outbound.direction - cam.direction).norm(), 0.0, 1e-9);
      EXPECT_NEAR(t->outbound.origin.z(), 5.0, 1e-12);
      EXPECT_TRUE(is_unit(t->outbound.direction));
    }
}

TEST(Trace, CameraAtInfinityOnTiltedFacet) {
  // Vertical in-water ray against a known normal: direct Snell oracle.
  OpticalConfig cfg;
  cfg.camera_at_infinity = true;
  const auto m = DropMask::disk(61, 61, 30, 30, 25);
  HeightField hf(m);
  m.for_each([&](int i, int j) { hf.set(i, j, 40.0 - 0.2 * j); });
  const DropSurface s(hf, cfg);
  const auto t = s.trace(30, 30);
  ASSERT_TRUE(t);
  const Vec3 n = t->normal;
  EXPECT_NEAR(std::abs(n.x()), 0.2 / std::sqrt(1.04), 1e-9);
  EXPECT_NEAR(n.z(), 1.0 / std::sqrt(1.04), 1e-9);
  const double ti = std::acos(n.z());
  const double tt = std::asin(cfg.n_water / cfg.n_air * std::sin(ti));
  EXPECT_NEAR(std::acos(t->outbound.direction.dot(n)), tt, 1e-9);
  EXPECT_NEAR(t->theta_cprime, 0.0, 1e-12);
}

TEST(Trace, RimIsNotWaterAndOutsideThrows) {
  const auto hf = cap(81, 30, 0.3);
  const DropSurface s(hf, OpticalConfig{});
  EXPECT_FALSE(s.is_water(40, 40 - 30));
  EXPECT_TRUE(s.is_water(40, 40));
  EXPECT_THROW(s.trace(0, 0), DomainError);
}

TEST(DarkBand, PixelsBeyondCriticalNormalAreDark) {
  const auto hf = cap(121, 50, 0.35);
  const DropSurface s(hf, OpticalConfig{});
  const auto band = dark_band_mask(s);
  EXPECT_GT(band.count, 0);
  hf.mask().for_each([&](int i, int j) {
    if (!s.is_water(i, j)) return;
    const bool dark = band.contains(i, j);
    EXPECT_EQ(dark, s.normal(i, j).z() <= s.critical_nz(i, j));
    if (!dark) EXPECT_TRUE(s.trace(i, j).has_value());
  });
  // The drop centre is flat and transmits.
  EXPECT_FALSE(band.contains(60, 60));
}

TEST(AngularProject, PerspectiveDivision) {
  const Ray r{Vec3::Zero(), Vec3(0.3, -0.2, 0.9).normalized()};
  const auto uv = angular_project(r);
  EXPECT_NEAR(uv[0], 0.3 / 0.9, 1e-12);
  EXPECT_NEAR(uv[1], -0.2 / 0.9, 1e-12);
  EXPECT_THROW(angular_project(Ray{Vec3::Zero(), Vec3(1, 0, 0)}), DomainError);
}

TEST(Splat, CoversExactlyThePixelCentresInsideTheTriangle) {
  SplatVertex<1> a{1.3, 2.2, {1.0}}, b{17.6, 4.1, {2.0}}, c{6.2, 15.9, {3.0}};
  Grid<int> hit(20, 20, 0);
  const int sign = splat_triangle<1>(a, b, c, 20, 20, [&](int r, int col, const std::array<double, 1>& p) {
    ++hit(r, col);
    EXPECT_GE(p[0], 1.0 - 1e-12);
    EXPECT_LE(p[0], 3.0 + 1e-12);
  });
  EXPECT_EQ(sign, 1);
  auto side = [](const SplatVertex<1>& p, const SplatVertex<1>& q, double x, double y) {
    return (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x);
  };
  for (int r = 0; r < 20; ++r)
    for (int col = 0; col < 20; ++col) {
      const bool inside = side(a, b, col, r) > 1e-9 && side(b, c, col, r) > 1e-9 &&
                          side(c, a, col, r) > 1e-9;
      if (inside) EXPECT_EQ(hit(r, col), 1);
      const bool outside = side(a, b, col, r) < -1e-9 || side(b, c, col, r) < -1e-9 ||
                           side(c, a, col, r) < -1e-9;
      if (outside) EXPECT_EQ(hit(r, col), 0);
    }
}

TEST(Splat, InterpolatesLinearPayloadExactly) {
  // Payload f(x, y) = 2x - 3y + 1 is reproduced at every covered centre.
  auto f = [](double x, double y) { return 2 * x - 3 * y + 1; };
  SplatVertex<1> a{0.5, 0.5, {f(0.5, 0.5)}}, b{9.5, 1.5, {f(9.5, 1.5)}}, c{3.5, 8.5, {f(3.5, 8.5)}};
  splat_triangle<1>(a, b, c, 10, 10, [&](int r, int col, const std::array<double, 1>& p) {
    EXPECT_NEAR(p[0], f(col, r), 1e-12);
  });
}

TEST(Dewarp, CapIsOneToOneWithPositiveJacobian) {
  const auto hf = cap(161, 70, 0.3);
  const auto img = synthetic::checkerboard(161, 161, 8);
  const auto d = dewarp_image(img, hf, OpticalConfig{}, 128, 0.5);
  EXPECT_GT(d.valid_count(), 1000);
  EXPECT_GT(d.positive_jacobian, 0);
  EXPECT_EQ(d.negative_jacobian, 0);
  // The back-map lands inside the drop.
  for (int r = 0; r < d.height(); r += 7)
    for (int c = 0; c < d.width(); c += 7) {
      if (!d.valid(r, c)) continue;
      EXPECT_TRUE(hf.mask().contains(static_cast<int>(std::lround(d.src_i(r, c))),
                                     static_cast<int>(std::lround(d.src_j(r, c)))));
    }
}

TEST(Render, NoDropsGivesBlurredBackground) {
  OpticalConfig cfg;
  SceneSpec sc;
  sc.width = 64;
  sc.height = 48;
  ScenePlane pl;
  pl.depth = 1000;
  pl.texture = synthetic::checkerboard(200, 200, 10);
  pl.offset_x = pl.offset_y = -100;
  sc.planes.push_back(pl);
  const auto img = render_synthetic(sc, {}, cfg);
  const auto expect = gaussian_blur(render_background(sc, cfg), sc.blur_radius);
  EXPECT_EQ(img.samples(), expect.samples());
  // Background pixel: texture at the camera ray's plane hit.
  const Ray r = camera_ray(cfg, 64, 48, 10, 20);
  const Vec3 p = r.at((1000.0 - r.origin.z()) / r.direction.z());
  EXPECT_NEAR(render_background(sc, cfg)(10, 20), pl.texture.sample(p.y() + 100, p.x() + 100),
              1e-12);
}

TEST(Render, DarkBandShowsLeakAndDepthIsRecorded) {
  OpticalConfig cfg;
  const auto hf = cap(121, 50, 0.35);
  SceneSpec sc;
  sc.width = sc.height = 121;
  sc.leak = 0.03;
  ScenePlane pl;
  pl.depth = 2000;
  pl.texture = RasterGray(500, 500, 0.8);
  pl.scale = 40;
  pl.offset_x = pl.offset_y = -10000;
  sc.planes.push_back(pl);
  const auto out = render_synthetic_full(sc, {hf}, cfg);
  const DropSurface s(hf, cfg);
  const auto band = dark_band_mask(s);
  long checked = 0;
  hf.mask().for_each([&](int i, int j) {
    if (band.contains(i, j)) {
      EXPECT_NEAR(out.image(i, j), 0.03, 1e-12);
      EXPECT_TRUE(std::isnan(out.drop_depth[0](i, j)));
      ++checked;
    } else if (s.is_water(i, j)) {
      EXPECT_NEAR(out.drop_depth[0](i, j), 2000.0f, 1e-2);
      EXPECT_NEAR(out.image(i, j), 0.8 * s.trace(i, j)->transmittance, 1e-12);
    }
  });
  EXPECT_GT(checked, 0);
  sc.planes[0].depth = 1.0;
  EXPECT_THROW(render_synthetic(sc, {hf}, cfg), DomainError);
}
