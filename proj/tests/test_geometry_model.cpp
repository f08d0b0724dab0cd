#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "nfield/geometry.hpp"
#include "nfield/model.hpp"
#include "support.hpp"

using namespace nfield;
using nfield::test::simpson;

TEST(Geometry, RingNodes) {
  const Domain d = build_ring(kPi, 4);
  ASSERT_EQ(d.size(), 4u);
  const double expect[4] = {-kPi, -kPi / 2, 0.0, kPi / 2};
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(d.node(j).x, expect[j]);
  for (double w : d.weights()) EXPECT_DOUBLE_EQ(w, kPi / 2);
  EXPECT_DOUBLE_EQ(d.measure(), 2 * kPi);
}

TEST(Geometry, RingDistanceWraps) {
  const Domain d = build_ring(kPi, 4);
  EXPECT_NEAR(d.distance(0, 3), kPi / 2, 1e-15);
  EXPECT_NEAR(d.distance(0, 2), kPi, 1e-15);
}

TEST(Geometry, WeightsSumToMeasure) {
  for (const Domain& d : {build_ring(3.0, 17), build_interval(2.0, 9), build_hex(5.0, 0.7)}) {
    const double s = std::accumulate(d.weights().begin(), d.weights().end(), 0.0);
    EXPECT_NEAR(s, d.measure(), 1e-12 * d.measure());
  }
}

TEST(Geometry, RingModesCancel) {
  const Domain d = build_ring(2.5, 64);
  for (int k = 1; k < 64; ++k) {
    std::complex<double> s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) s += std::polar(1.0, k * kPi * d.node(j).x / 2.5);
    EXPECT_LT(std::abs(s), 1e-11) << "k = " << k;
  }
}

TEST(Geometry, HexCounts) {
  EXPECT_EQ(build_hex(1.0, 0.6).size(), 7u);
  EXPECT_EQ(build_hex(30.0, 30.0 / 33.0).size(), 3367u);
}

TEST(Geometry, HexIsSymmetric) {
  const Domain d = build_hex(4.0, 0.5);
  double sx = 0, sy = 0;
  for (const auto& p : d.nodes()) sx += p.x, sy += p.y;
  EXPECT_NEAR(sx, 0.0, 1e-9);
  EXPECT_NEAR(sy, 0.0, 1e-9);
}

TEST(Geometry, RejectsBadParameters) {
  EXPECT_THROW(build_ring(-1.0, 8), ConfigError);
  EXPECT_THROW(build_ring(1.0, 1), ConfigError);
  EXPECT_THROW(build_hex(1.0, 2.0), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Firing, HalfAtThreshold) {
  const auto f = FiringRate::erf_sigmoid(10.0, 0.4);
  EXPECT_DOUBLE_EQ(f(0.4), 0.5);
  for (double v : {0.0, 0.1, 1.0}) EXPECT_NEAR(firing_moment(0.4, v, f), 0.5, 1e-15);
}

TEST(Firing, SlopeAtThreshold) {
  const double a = 10.0;
  const auto f = FiringRate::erf_sigmoid(a, 0.4, 1.5);
  for (double v : {0.0, 0.02, 0.3}) {
    const double expect = 1.5 * a / (std::sqrt(2 * kPi) * std::sqrt(1 + a * a * v));
    EXPECT_NEAR(firing_moment_dm(0.4, v, f), expect, 1e-12 * expect);
  }
}

TEST(Firing, GaussianMomentMatchesDirectIntegral) {
  const auto f = FiringRate::erf_sigmoid(10.0, 0.4);
  for (double m : {-0.3, 0.2, 0.4, 0.9})
    for (double v : {0.01, 0.1, 0.5}) {
      auto g = [&](double z) { return normal_cdf(10.0 * (m + std::sqrt(v) * z - 0.4)) * normal_pdf(z); };
      const double ref = simpson(g, -12.0, 12.0, 24000);
      EXPECT_NEAR(firing_moment(m, v, f), ref, 1e-10) << m << " " << v;
    }
}

TEST(Firing, ZeroVarianceIsPointwise) {
  const auto f = FiringRate::erf_sigmoid(3.0, 0.1, 2.0);
  for (double m : {-1.0, 0.0, 0.7}) EXPECT_DOUBLE_EQ(firing_moment(m, 0.0, f), f(m));
}

// ---------------------------------------------------------------------------

TEST(Kernel, GaussianDiffAtOrigin) {
  const auto k = Kernel::gaussian_diff(1.5, 7.0);
  EXPECT_NEAR(k.eval(0.0), 7.0 / std::sqrt(kPi) * (1.0 - 1.0 / 1.5), 1e-14);
}

TEST(Kernel, GaussianDiffIsBalanced) {
  const auto k = Kernel::gaussian_diff(1.5, 7.0);
  EXPECT_NEAR(kernel_ring_integral(k, test::kRingL), 0.0, 1e-12);
}

TEST(Kernel, GaussianDiffFourierClosedForm) {
  const double l = test::kRingL, B = 1.5, C = 7.0;
  const auto k = Kernel::gaussian_diff(B, C);
  for (int n : {0, 1, 5, 15, 16, 20}) {
    const double w = n * kPi / l;
    const double full_line = C * std::exp(-w * w / 4) - C * std::exp(-B * B * w * w / 4);
    EXPECT_NEAR(2 * l * kernel_fourier_coeff(k, l, n), full_line, 1e-10) << "k = " << n;
  }
}

TEST(Kernel, OscillatoryDecayIntegral) {
  const double l = test::kRingL;
  const auto k = Kernel::oscillatory_decay(0.4, 1.0);
  EXPECT_DOUBLE_EQ(k.eval(0.0), 1.0);
  const double ref = simpson([&](double x) { return k.eval(x); }, -l, l, 200000);
  EXPECT_NEAR(kernel_ring_integral(k, l), ref, 1e-9);
}

TEST(Kernel, SplitIsDisjoint) {
  const auto k = Kernel::gaussian_diff(1.5, 7.0);
  for (double r = 0.0; r < 5.0; r += 0.05) {
    const auto [p, m] = k.split(r);
    EXPECT_EQ(p * m, 0.0);
    EXPECT_DOUBLE_EQ(p - m, k.eval(r));
  }
}

TEST(Kernel, LateralProfileValues) {
  // a(r) = -(2/sqrt 3) Im K0(e^{i pi/6} r), tabulated independently.
  EXPECT_NEAR(bessel_lateral_cached(0.0), kPi / (3 * std::sqrt(3.0)), 1e-9);
  EXPECT_NEAR(bessel_lateral_cached(0.5), 0.507871907172, 1e-9);
  EXPECT_NEAR(bessel_lateral_cached(1.0), 0.370970151902, 1e-9);
  EXPECT_NEAR(bessel_lateral_cached(3.0), 0.059253602732, 1e-9);
  EXPECT_NEAR(bessel_lateral_cached(10.0), -6.718133869612e-5, 1e-10);
}

TEST(Kernel, LateralCutoff) {
  const auto k = Kernel::bessel_lateral(1.5);
  EXPECT_NEAR(k.eval(1.0), 1.5 * 0.370970151902, 1e-8);
  EXPECT_EQ(k.eval(10.0), 0.0);
}

TEST(Kernel, TabulatedInterpolates) {
  const auto k = Kernel::tabulated(1.0, {0.5, 0.0, 0.0}, {0.0, 0.0, 0.25});
  EXPECT_DOUBLE_EQ(k.eval(0.0), 0.5);
  EXPECT_DOUBLE_EQ(k.eval(0.5), 0.25);
  EXPECT_DOUBLE_EQ(k.eval(2.0), -0.25);
  EXPECT_DOUBLE_EQ(k.eval(3.5), 0.0);
  EXPECT_THROW(Kernel::tabulated(1.0, {-0.1}, {0.0}), ConfigError);
}

TEST(Model, ValidateCatchesShapes) {
  ModelSpec m = test::turing_model(0.5);
  EXPECT_NO_THROW(validate_model(m));
  m.L = Mat::Identity(2, 2);
  EXPECT_THROW(validate_model(m), ConfigError);
}
