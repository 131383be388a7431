#include "dropstereo/solver.hpp"
#include "dropstereo/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dropstereo;

namespace {
HeightField bumpy(const DropMask& m, unsigned seed) {
  HeightField hf(m);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(1.0, 6.0);
  m.for_each([&](int i, int j) { hf.set(i, j, m.on_rim(i, j) ? 0.0 : u(rng)); });
  return hf;
}
}  // namespace

TEST(Solver, InitialVolumeAndMesh) {
  const auto m = DropMask::disk(40, 40, 20, 20, 12);
  const double B = static_cast<double>(m.area());
  EXPECT_NEAR(initial_volume(m, 0.3), 0.3 * B * std::sqrt(B), 1e-9);
  const auto hf = init_mesh(m, 0.3);
  EXPECT_NEAR(volume_of(hf), initial_volume(m, 0.3), 1e-9 * initial_volume(m, 0.3));
  EXPECT_NEAR(alpha_of_volume(m, volume_of(hf)), 0.3, 1e-12);
  EXPECT_THROW(initial_volume(m, 0.0), DomainError);
}

TEST(Solver, VolumeStepHitsTarget) {
  const auto m = DropMask::disk(40, 40, 20, 20, 12);
  for (bool pinned : {false, true}) {
    const auto hf = volume_step(bumpy(m, 1), 5000.0, pinned);
    EXPECT_NEAR(volume_of(hf), 5000.0, 1e-9 * 5000.0);
    hf.mask().for_each([&](int i, int j) { EXPECT_GE(hf(i, j), 0.0); });
  }
}

TEST(Solver, VolumeStepKeepsHeightsNonNegative) {
  // A target far below the current volume forces clamping and redistribution.
  const auto m = DropMask::disk(40, 40, 20, 20, 12);
  const auto hf = volume_step(bumpy(m, 2), 50.0, true);
  EXPECT_NEAR(volume_of(hf), 50.0, 1e-9 * 50.0);
  hf.mask().for_each([&](int i, int j) { EXPECT_GE(hf(i, j), 0.0); });
}

TEST(Solver, EnergyOfFlatColumn) {
  // Flat z = c: tension sigma * B, gravity g * B * c^2 / 2 with vertical gravity.
  const auto m = DropMask::disk(30, 30, 15, 15, 9);
  const HeightField hf(m, 2.5);
  OpticalConfig cfg;
  cfg.tension_weight = 1.7;
  cfg.gravity_weight = 0.01;
  const auto e = energy_of(hf, cfg);
  EXPECT_NEAR(e.tension, 1.7 * m.area(), 1e-9);
  EXPECT_NEAR(e.gravity, 0.01 * m.area() * 0.5 * 2.5 * 2.5, 1e-9);
  EXPECT_NEAR(e.total, e.tension + e.gravity, 1e-12);
}

TEST(Solver, TensionStepLowersTensionEnergy) {
  const auto m = DropMask::disk(30, 30, 15, 15, 9);
  OpticalConfig cfg;
  cfg.gravity_weight = 0.0;
  SolverParams p;
  p.tau = 0.1;
  auto hf = bumpy(m, 4);
  const double before = energy_of(hf, cfg).tension;
  hf = tension_step(hf, p, cfg);
  EXPECT_LT(energy_of(hf, cfg).tension, before);
}

TEST(Solver, GravityStepIgnoresVerticalGravityAndTiltsOtherwise) {
  const auto m = DropMask::disk(30, 30, 15, 15, 9);
  const HeightField hf(m, 3.0);
  SolverParams p;
  OpticalConfig cfg;
  const auto same = gravity_step(hf, p, cfg);
  EXPECT_EQ(same, hf);
  cfg.gravity_cosines = {std::sqrt(0.5), 0.0, std::sqrt(0.5)};
  cfg.gravity_weight = 0.01;
  const auto tilted = gravity_step(hf, p, cfg);
  // Heights move linearly in the column, zero change at the centroid column.
  const double xg = mask_centroid(hf)[0];
  const double k = p.tau * cfg.gravity_weight * cfg.gravity_cosines[0];
  for (int j = 10; j <= 20; ++j)
    EXPECT_NEAR(tilted(15, j) - 3.0, -k * (xg - j), 1e-12);
}

TEST(Solver, FixedVolumeSolveConservesVolumeAndConverges) {
  const auto m = DropMask::disk(60, 60, 30, 30, 20);
  OpticalConfig cfg;
  SolverParams p;
  p.max_iters = 20000;
  const double V = initial_volume(m, 0.3);
  const auto [hf, rep] = solve_fixed_volume(m, V, p, cfg);
  EXPECT_TRUE(rep.converged);
  EXPECT_NEAR(volume_of(hf), V, 1e-9 * V);
  EXPECT_EQ(rep.iterations_run, static_cast<int>(rep.sweep_change.size()));
  m.for_each([&](int i, int j) {
    if (m.on_rim(i, j)) EXPECT_EQ(hf(i, j), 0.0);
  });
  // Mirror symmetry of a centred disk.
  EXPECT_NEAR(hf(30, 20), hf(30, 40), 1e-3);
  EXPECT_NEAR(hf(20, 30), hf(40, 30), 1e-3);
  // The gravity step is a planar tilt, not the gradient of the vertical
  // gravity term, so only the end point is compared with the start.
  HeightField cylinder = init_mesh(m, 0.3);
  m.for_each([&](int i, int j) {
    if (m.on_rim(i, j)) cylinder.set(i, j, 0.0);
  });
  cylinder = volume_step(cylinder, V, true);
  EXPECT_LE(rep.final_energy, energy_of(cylinder, cfg).total);
}

TEST(Solver, ZeroGravityEnergySamplesNeverRise) {
  const auto m = DropMask::disk(60, 60, 30, 30, 20);
  OpticalConfig cfg;
  cfg.gravity_weight = 0.0;
  SolverParams p;
  p.max_iters = 20000;
  const auto [hf, rep] = solve_fixed_volume(m, initial_volume(m, 0.3), p, cfg);
  ASSERT_GT(rep.energy_trace.size(), 10u);
  for (std::size_t k = 1; k < rep.energy_trace.size(); ++k)
    EXPECT_LE(rep.energy_trace[k], rep.energy_trace[k - 1] + 1e-9);
}

TEST(Solver, ObserverSeesTargetVolumeAfterEverySweep) {
  const auto m = DropMask::disk(50, 50, 25, 25, 18);
  const double V = initial_volume(m, 0.25);
  SolverParams p;
  p.max_iters = 300;
  int calls = 0;
  double worst = 0.0;
  solve_fixed_volume(m, V, p, OpticalConfig{}, [&](int it, double v) {
    EXPECT_EQ(it, calls++);
    worst = std::max(worst, std::abs(v - V) / V);
  });
  EXPECT_EQ(calls, 300);
  EXPECT_LE(worst, 1e-9);
}

TEST(Solver, RejectsBadParameters) {
  const auto m = DropMask::disk(20, 20, 10, 10, 5);
  SolverParams p;
  p.tau = 0.0;
  EXPECT_THROW(solve_fixed_volume(m, 100.0, p, OpticalConfig{}), DomainError);
  EXPECT_THROW(solve_fixed_volume(m, -1.0, SolverParams{}, OpticalConfig{}), DomainError);
}

TEST(Synthetic, CapHeightSolvesCapVolume) {
  const double a = 37.0, V = 41000.0;
  const double h = synthetic::cap_height(a, V);
  EXPECT_NEAR(M_PI * h * (3 * a * a + h * h) / 6.0, V, 1e-8 * V);
}
