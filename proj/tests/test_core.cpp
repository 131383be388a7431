#include "dropstereo/core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dropstereo;

TEST(Grid, StoresRowMajorAndChecksBounds) {
  Grid<int> g(3, 2, 7);
  EXPECT_EQ(g.size(), 6u);
  g(1, 2) = 5;
  EXPECT_EQ(g.data()[1 * 3 + 2], 5);
  EXPECT_TRUE(g.in_bounds(1, 2));
  EXPECT_FALSE(g.in_bounds(2, 0));
  EXPECT_FALSE(g.in_bounds(0, -1));
  EXPECT_THROW(Grid<int>(-1, 2), DomainError);
}

TEST(RasterGray, ClampsToUnitInterval) {
  RasterGray r(2, 2);
  r.set(0, 0, 1.7);
  r.set(0, 1, -0.3);
  r.set(1, 0, std::nan(""));
  EXPECT_EQ(r(0, 0), 1.0);
  EXPECT_EQ(r(0, 1), 0.0);
  EXPECT_EQ(r(1, 0), 0.0);
}

TEST(RasterGray, BilinearSampleMatchesHandFormula) {
  RasterGray r(2, 2);
  r.set(0, 0, 0.1);
  r.set(0, 1, 0.5);
  r.set(1, 0, 0.3);
  r.set(1, 1, 0.9);
  const double a = 0.25, b = 0.6;
  const double expect = (1 - a) * (1 - b) * 0.1 + (1 - a) * b * 0.5 + a * (1 - b) * 0.3 + a * b * 0.9;
  EXPECT_NEAR(r.sample(a, b), expect, 1e-15);
  EXPECT_NEAR(r.sample(-3.0, 5.0), 0.5, 1e-15);  // edge replication
}

TEST(DropMask, DiskAreaMatchesBruteCount) {
  const auto m = DropMask::disk(50, 40, 20.3, 24.7, 11.2);
  long n = 0;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 50; ++j)
      if ((i - 20.3) * (i - 20.3) + (j - 24.7) * (j - 24.7) <= 11.2 * 11.2) ++n;
  EXPECT_EQ(m.area(), n);
  EXPECT_NEAR(m.equivalent_diameter(), 2.0 * std::sqrt(n / M_PI), 1e-12);
}

TEST(DropMask, RejectsDisconnectedMembership) {
  Grid<std::uint8_t> g(5, 5, 0);
  g(0, 0) = 1;
  g(1, 1) = 1;  // diagonal only: two 4-components
  EXPECT_THROW(DropMask::from_membership(g), DomainError);
}

TEST(DropMask, RimAndMembership) {
  const auto m = DropMask::from_predicate(6, 6, [](int i, int j) {
    return i >= 1 && i <= 4 && j >= 1 && j <= 4;
  });
  EXPECT_EQ(m.area(), 16);
  EXPECT_TRUE(m.on_rim(1, 2));
  EXPECT_FALSE(m.on_rim(2, 2));
  EXPECT_FALSE(m.on_rim(0, 0));
  EXPECT_EQ(m.to_membership()(4, 4), 1);
  const auto t = m.translated(1, 0, 6, 6);
  EXPECT_TRUE(t.contains(5, 1));
  EXPECT_FALSE(t.contains(1, 1));
}

TEST(HeightField, OutsideReadsZeroAndSetRejects) {
  const auto m = DropMask::disk(10, 10, 5, 5, 3);
  HeightField hf(m, 2.0);
  EXPECT_EQ(hf(5, 5), 2.0);
  EXPECT_EQ(hf(0, 0), 0.0);
  EXPECT_THROW(hf.set(0, 0, 1.0), DomainError);
  EXPECT_EQ(hf.max_height(), 2.0);
}

TEST(HeightField, InterpolateIsBilinear) {
  const auto m = DropMask::disk(10, 10, 5, 5, 4);
  HeightField hf(m);
  m.for_each([&](int i, int j) { hf.set(i, j, 0.5 * i + 0.25 * j); });
  EXPECT_NEAR(hf.interpolate(4.3, 5.6), 0.5 * 4.3 + 0.25 * 5.6, 1e-12);
}

namespace {
HeightField plane_field(double a, double b) {
  const auto m = DropMask::disk(30, 30, 15, 15, 10);
  HeightField hf(m);
  m.for_each([&](int i, int j) { hf.set(i, j, 3.0 + a * j + b * i); });
  return hf;
}
}  // namespace

TEST(Operators, GradientOfPlaneIsExactEverywhere) {
  const auto hf = plane_field(0.3, -0.7);
  hf.mask().for_each([&](int i, int j) {
    const auto g = gradient_at(hf, i, j);
    const auto& m = hf.mask();
    // A pixel with no neighbour along an axis has zero derivative there.
    const bool row_alone = !m.contains(i, j - 1) && !m.contains(i, j + 1);
    const bool col_alone = !m.contains(i - 1, j) && !m.contains(i + 1, j);
    EXPECT_NEAR(g.dx, row_alone ? 0.0 : 0.3, 1e-12);
    EXPECT_NEAR(g.dy, col_alone ? 0.0 : -0.7, 1e-12);
  });
}

TEST(Operators, NormalOfPlane) {
  const auto hf = plane_field(0.3, -0.7);
  const Vec3 n = surface_normal(hf, 15, 15);
  const Vec3 expect = Vec3(-0.3, 0.7, 1.0).normalized();
  EXPECT_NEAR((n - expect).norm(), 0.0, 1e-12);
  EXPECT_TRUE(is_unit(n));
}

TEST(Operators, DivergenceOfQuadraticGradient) {
  // z = x^2 + y^2: div grad z = 4 at pixels two steps inside the rim.
  const auto m = DropMask::disk(40, 40, 20, 20, 15);
  HeightField hf(m);
  m.for_each([&](int i, int j) { hf.set(i, j, double(j) * j + double(i) * i); });
  const auto div = divergence(gradient(hf));
  const auto& b = m.box();
  for (int i = 15; i <= 25; ++i)
    for (int j = 15; j <= 25; ++j) EXPECT_NEAR(div(i - b.row0, j - b.col0), 4.0, 1e-9);
}

TEST(Operators, CentroidIsHeightWeightedOverArea) {
  const auto m = DropMask::disk(20, 20, 9, 11, 5);
  HeightField hf(m);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  double sx = 0, sy = 0;
  m.for_each([&](int i, int j) {
    const double z = u(rng);
    hf.set(i, j, z);
    sx += z * j;
    sy += z * i;
  });
  const auto c = mask_centroid(hf);
  EXPECT_NEAR(c[0], sx / m.area(), 1e-12);
  EXPECT_NEAR(c[1], sy / m.area(), 1e-12);
}

TEST(OpticalConfig, PlatePixelRoundTripAndValidation) {
  OpticalConfig cfg;
  const Vec3 p = plate_point(cfg, 101, 51, 10.0, 70.0);
  EXPECT_NEAR(p.x(), 70.0 - 50.0, 1e-12);
  EXPECT_NEAR(p.y(), 10.0 - 25.0, 1e-12);
  const auto px = plate_to_pixel(cfg, 101, 51, p.x(), p.y());
  EXPECT_NEAR(px[0], 10.0, 1e-12);
  EXPECT_NEAR(px[1], 70.0, 1e-12);
  cfg.n_water = 0.9;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = OpticalConfig{};
  cfg.gravity_cosines = {0.5, 0.0, 0.5};
  EXPECT_THROW(cfg.validate(), DomainError);
}
