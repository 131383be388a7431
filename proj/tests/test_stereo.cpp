#include "dropstereo/stereo.hpp"
#include "dropstereo/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dropstereo;

namespace {
Ray ray_through(const Vec3& origin, const Vec3& target) {
  return {origin, (target - origin).normalized()};
}

DewarpResult view_of(const RasterGray& tex, int row0, int col0, int w, int h) {
  DewarpResult d;
  d.image = RasterGray(w, h);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) d.image.set(i, j, tex(row0 + i, col0 + j));
  d.valid = Grid<std::uint8_t>(w, h, 1);
  d.src_i = d.src_j = Grid<double>(w, h, 0.0);
  return d;
}
}  // namespace

TEST(Triangulate, RecoversCommonPointExactly) {
  const Vec3 p(12.5, -40.0, 1800.0);
  const std::vector<Ray> rays = {ray_through({0, 0, 20}, p), ray_through({150, 10, 35}, p),
                                 ray_through({-80, 60, 12}, p)};
  const auto t = triangulate(rays);
  EXPECT_NEAR((t.point - p).norm(), 0.0, 1e-7);
  EXPECT_NEAR(t.residual, 0.0, 1e-12);
}

TEST(Triangulate, SkewPairGivesMidpointOfCommonPerpendicular) {
  // Ray 1 along x at z = 0, ray 2 along y at z = 10: closest points (0,0,0)
  // and (0,0,10).
  const std::vector<Ray> rays = {{Vec3(-5, 0, 0), Vec3(1, 0, 0)}, {Vec3(0, 3, 10), Vec3(0, 1, 0)}};
  const auto t = triangulate(rays);
  EXPECT_NEAR((t.point - Vec3(0, 0, 5)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(t.residual, 50.0, 1e-9);
}

TEST(Triangulate, ParallelRaysAreDegenerate) {
  const std::vector<Ray> rays = {{Vec3(0, 0, 0), Vec3(0, 0, 1)}, {Vec3(5, 0, 0), Vec3(0, 0, 1)}};
  EXPECT_THROW(triangulate(rays), DegenerateGeometryError);
  EXPECT_THROW(triangulate({rays[0]}), DomainError);
  EXPECT_THROW(triangulate({rays[0], {Vec3::Zero(), Vec3(0, 0, 2)}}), DomainError);
}

TEST(Triangulate, MatchesDirectLeastSquaresOracle) {
  // Gradient descent on the sum of squared distances, independent of the
  // closed form.
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Ray> rays;
    const Vec3 p(200 * u(rng), 200 * u(rng), 1500 + 500 * u(rng));
    for (int k = 0; k < 3; ++k) {
      const Vec3 o(300 * u(rng), 300 * u(rng), 10 + 5 * u(rng));
      const Vec3 q = p + Vec3(3 * u(rng), 3 * u(rng), 3 * u(rng));
      rays.push_back(ray_through(o, q));
    }
    auto cost = [&](const Vec3& x) {
      double c = 0;
      for (const auto& r : rays) {
        const Vec3 d = x - r.origin;
        c += (d - d.dot(r.direction) * r.direction).squaredNorm();
      }
      return c;
    };
    Vec3 x = p;
    for (int it = 0; it < 200000; ++it) {
      Vec3 g = Vec3::Zero();
      for (const auto& r : rays) {
        const Vec3 d = x - r.origin;
        g += 2 * (d - d.dot(r.direction) * r.direction);
      }
      x -= 0.1 * g;
      if (g.norm() < 1e-12) break;
    }
    const auto t = triangulate(rays);
    EXPECT_LE(cost(t.point), cost(x) + 1e-9);
    EXPECT_NEAR((t.point - x).norm(), 0.0, 1e-3);
  }
}

TEST(BlockMatch, FindsIntegerShift) {
  const auto tex = synthetic::value_noise(200, 200, 6.0, 9);
  const auto a = view_of(tex, 40, 40, 80, 80);
  const auto b = view_of(tex, 43, 35, 80, 80);  // content moves by (-3, +5)
  BlockMatchParams p;
  p.search_radius = 8;
  p.min_score = 0.9;
  const auto m = block_match(a, b, p);
  ASSERT_GE(m.size(), 100u);
  for (const auto& x : m) {
    EXPECT_NEAR(x.r_b - x.r_a, -3.0, 0.5);
    EXPECT_NEAR(x.c_b - x.c_a, 5.0, 0.5);
    EXPECT_GE(x.score, 0.9);
  }
}

TEST(BlockMatch, GuidedLineSearchReachesLargeShifts) {
  const auto tex = synthetic::value_noise(300, 300, 6.0, 10);
  const auto a = view_of(tex, 40, 120, 100, 100);
  const auto b = view_of(tex, 40, 80, 100, 100);  // content moves by +40 columns
  BlockMatchParams p;
  p.search_radius = 3;
  p.guide = std::array<double, 2>{0.0, 1.0};
  p.guide_range = 60;
  const auto m = block_match(a, b, p);
  ASSERT_GE(m.size(), 50u);
  long right = 0;
  for (const auto& x : m) right += std::abs(x.c_b - x.c_a - 40.0) <= 0.5 && std::abs(x.r_b - x.r_a) <= 0.5;
  EXPECT_EQ(right, static_cast<long>(m.size()));
}

TEST(BlockMatch, SeedSelectsGridPhaseDeterministically) {
  const auto tex = synthetic::value_noise(200, 200, 6.0, 9);
  const auto a = view_of(tex, 40, 40, 80, 80);
  BlockMatchParams p;
  p.seed = 17;
  const auto m1 = block_match(a, a, p), m2 = block_match(a, a, p);
  ASSERT_EQ(m1.size(), m2.size());
  for (std::size_t k = 0; k < m1.size(); ++k) EXPECT_EQ(m1[k].r_a, m2[k].r_a);
}

TEST(BlockMatch, FlatImageHasNoMatches) {
  DewarpResult a;
  a.image = RasterGray(40, 40, 0.5);
  a.valid = Grid<std::uint8_t>(40, 40, 1);
  EXPECT_THROW(block_match(a, a), InsufficientMatchesError);
  BlockMatchParams p;
  p.window = 4;
  EXPECT_THROW(block_match(a, a, p), DomainError);
}

TEST(Depth, NeedsTwoDrops) {
  const auto hf = synthetic::spherical_cap(100, 100, 50, 50, 30, 15);
  EXPECT_THROW(depth_from_drops(RasterGray(100, 100, 0.5), {hf}, OpticalConfig{}),
               InsufficientDropsError);
}

TEST(Depth, GivenCorrespondencesTriangulateToTheirSource) {
  // Trace two drop pixels, place the scene point on ray a, and find the
  // matching pixel of drop b by brute force over its traced rays.
  OpticalConfig cfg;
  const auto a = synthetic::spherical_cap(300, 120, 60, 70, 40, 25);
  const auto b = synthetic::spherical_cap(300, 120, 60, 230, 40, 25);
  const DropSurface sa(a, cfg), sb(b, cfg);
  const auto ta = sa.trace(60, 75);
  ASSERT_TRUE(ta);
  const Vec3 p = ta->outbound.at((1500.0 - ta->outbound.origin.z()) / ta->outbound.direction.z());
  double best = 1e18;
  int bi = -1, bj = -1;
  b.mask().for_each([&](int i, int j) {
    if (!sb.is_water(i, j) || !sb.can_interpolate(i, j)) return;
    const auto t = sb.trace(i, j);
    if (!t) return;
    const Vec3 d = p - t->outbound.origin;
    const double dist = (d - d.dot(t->outbound.direction) * t->outbound.direction).norm();
    if (dist < best) {
      best = dist;
      bi = i;
      bj = j;
    }
  });
  ASSERT_GE(bi, 0);
  StereoParams sp;
  sp.match.min_matches = 1;
  const std::vector<Correspondence> corr = {{0, 1, 60, 75, double(bi), double(bj), 1.0}};
  const auto res = depth_from_drops(RasterGray(300, 120, 0.5), {a, b}, cfg, sp, corr);
  ASSERT_EQ(res.points.size(), 1u);
  EXPECT_EQ(res.valid_count(), 1);
  // Integer pixel quantization in drop b bounds the depth error.
  EXPECT_NEAR(res.points[0].z(), 1500.0, 0.05 * 1500.0);
  EXPECT_TRUE(std::isfinite(res.depth_maps[0](60, 75)));
  EXPECT_TRUE(std::isfinite(res.depth_maps[1](bi, bj)));
}

TEST(Depth, MedianOf) {
  EXPECT_DOUBLE_EQ(median_of({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median_of({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median_of({}), DomainError);
}
