#include "dropstereo/optics.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <random>

using namespace dropstereo;

TEST(Refract, ObeysSnellsLaw) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ang(0.0, 0.8);
  for (int k = 0; k < 200; ++k) {
    const double ti = ang(rng), phi = 6.0 * ang(rng);
    const Vec3 n(0, 0, 1);
    const Vec3 d(std::sin(ti) * std::cos(phi), std::sin(ti) * std::sin(phi), std::cos(ti));
    const double eta = 1.0 / 1.33;
    const auto t = refract(d, n, eta);
    ASSERT_TRUE(t);
    const double tt = std::acos(t->z());
    EXPECT_NEAR(std::sin(tt), eta * std::sin(ti), 1e-12);
    // Stays in the plane of incidence and on the far side.
    EXPECT_NEAR(d.cross(n).dot(*t), 0.0, 1e-12);
    EXPECT_GT(t->z(), 0.0);
    // Normal orientation does not matter.
    EXPECT_NEAR((*refract(d, -n, eta) - *t).norm(), 0.0, 1e-12);
  }
}

TEST(Refract, TotalInternalReflection) {
  const double tc = std::asin(1.0 / 1.33);
  const Vec3 n(0, 0, 1);
  const Vec3 beyond(std::sin(tc + 0.01), 0, std::cos(tc + 0.01));
  const Vec3 below(std::sin(tc - 0.01), 0, std::cos(tc - 0.01));
  EXPECT_FALSE(refract(beyond, n, 1.33));
  EXPECT_TRUE(refract(below, n, 1.33));
  EXPECT_THROW(refract(Vec3(1, 1, 0), n, 1.33), DomainError);
}

TEST(Fresnel, NormalIncidence) {
  const auto r = fresnel_transmittance(0.0, 1.0, 4.0 / 3.0);
  const double n = 4.0 / 3.0;
  EXPECT_NEAR(r.T, 1.0 - std::pow((n - 1) / (n + 1), 2), 1e-12);
}

TEST(Fresnel, MatchesCosineFormOfTheEquations) {
  const double na = 1.0, nw = 4.0 / 3.0;
  for (double ta = 0.05; ta < 1.5; ta += 0.05) {
    const double tw = std::asin(na * std::sin(ta) / nw);
    const double ci = std::cos(ta), ct = std::cos(tw);
    const double rs = (na * ci - nw * ct) / (na * ci + nw * ct);
    const double rp = (nw * ci - na * ct) / (nw * ci + na * ct);
    const auto f = fresnel_transmittance(ta, na, nw);
    EXPECT_NEAR(f.Ts, 1 - rs * rs, 1e-12);
    EXPECT_NEAR(f.Tp, 1 - rp * rp, 1e-12);
    EXPECT_NEAR(f.T, 0.5 * (f.Ts + f.Tp), 1e-15);
  }
}

TEST(Fresnel, BrewsterAngleTransmitsAllP) {
  const double nw = 4.0 / 3.0;
  EXPECT_NEAR(fresnel_transmittance(std::atan(nw), 1.0, nw).Tp, 1.0, 1e-9);
}

TEST(Fresnel, FromWaterCutsOffAtCriticalAngle) {
  const double nw = 4.0 / 3.0, tc = std::asin(1.0 / nw);
  EXPECT_EQ(transmittance_from_water(tc + 1e-6, 1.0, nw), 0.0);
  EXPECT_GT(transmittance_from_water(tc - 0.05, 1.0, nw), 0.0);
  EXPECT_THROW(fresnel_transmittance(M_PI / 2, 1.0, nw), DomainError);
}

TEST(DarkBand, CriticalNormalAndLinearBand) {
  EXPECT_NEAR(critical_normal_z(0.0, 3.0, 4.0), std::sqrt(1.0 - 0.75 * 0.75), 1e-12);
  EXPECT_NEAR(critical_normal_z(0.2, 3.0, 4.0), std::cos(std::asin(0.75) + 0.2), 1e-12);
  EXPECT_EQ(critical_normal_z(1.5, 3.0, 4.0), 0.0);
  EXPECT_EQ(band_transmittance_linear(0.5, 0.6), 0.0);
  EXPECT_NEAR(band_transmittance_linear(0.65, 0.6), 7.68 * 0.05, 1e-12);
  EXPECT_NEAR(band_mean_transmittance_linear(0.1), 0.384, 1e-12);
}

TEST(EquivalentCamera, BackProjectedRefractedRayMeetsAxisAtCPrime) {
  // Refract the camera ray at the plate and extend it backwards to the axis.
  const double na = 1.0, nw = 4.0 / 3.0, zc = 5000.0;
  const Vec3 C(0, 0, zc);
  for (double r : {10.0, 300.0, 1500.0, 4000.0}) {
    const Vec3 x(r * 0.6, r * 0.8, 0.0);
    const double ta = std::atan2(r, zc);
    const double tw = std::asin(na * std::sin(ta) / nw);
    const double height = r / std::tan(tw);
    const Vec3 cp = equivalent_camera(C, x, na, nw);
    EXPECT_NEAR(cp.z(), height, 1e-9 * height);
    EXPECT_EQ(cp.x(), 0.0);
  }
  EXPECT_NEAR(equivalent_camera(C, Vec3(100, 0, 0), na, nw, true).z(), nw / na * zc, 1e-9);
}
