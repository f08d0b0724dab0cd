#include <gtest/gtest.h>

#include <cmath>

#include "nfield/analysis.hpp"
#include "nfield/bifurcation.hpp"
#include "support.hpp"

using namespace nfield;

namespace {

double dF_oracle(double m, double v, double alpha, double theta) {
  const double s = std::sqrt(1 + alpha * alpha * v);
  const double z = alpha * (m - theta) / s;
  return alpha / s * std::exp(-z * z / 2) / std::sqrt(2 * kPi);
}

}  // namespace

TEST(Homogeneous, DegenerateKernelGivesZero) {
  const ModelSpec m = test::scalar_model(Kernel::gaussian_diff(1.0, 7.0), 10.0, 0.4, 0.5);
  for (double s : {0.0, 0.3, 1.0}) EXPECT_EQ(homogeneous_state(m, test::kRingL, s), 0.0);
}

TEST(Homogeneous, BalancedKernelNearZero) {
  const ModelSpec m = test::turing_model(0.0);
  for (double s = 0.0; s <= 1.2; s += 0.1) EXPECT_LE(std::abs(homogeneous_state(m, test::kRingL, s)), 1e-10);
}

TEST(Homogeneous, ConstantRateIsLinear) {
  ModelSpec m = test::scalar_model(Kernel::constant(0.3), 1.0, 0.0, 0.2);
  m.firing = {FiringRate::constant(0.5)};
  const double l = 2.0, c = 0.3 * 2 * l;
  EXPECT_NEAR(homogeneous_state(m, l, 0.2), c / 2, 1e-14);
}

TEST(Dispersion, MatchesClosedForm) {
  const ModelSpec m = test::turing_model(0.0);
  const double l = test::kRingL;
  for (double s : {0.0, 0.3, 0.58, 1.0})
    for (int k : {1, 10, 15, 16}) {
      const double v = s * s / 2;
      const double w = k * kPi / l;
      const double Ahat = 7.0 * std::exp(-w * w / 4) - 7.0 * std::exp(-2.25 * w * w / 4);
      const double expect = -1.0 + dF_oracle(0.0, v, 10.0, 0.4) * Ahat;
      EXPECT_NEAR(dispersion_lambda(m, l, s, k), expect, 1e-9) << s << " " << k;
    }
}

TEST(Dispersion, ScanFindsCrossings) {
  const ModelSpec m = test::turing_model(0.0);
  std::vector<double> grid;
  for (int i = 0; i <= 120; ++i) grid.push_back(0.01 * i);
  const auto scan = turing_scan(m, test::kRingL, grid, 20);
  ASSERT_NE(scan.first(), nullptr);
  EXPECT_LE(scan.first()->sigma_hi - scan.first()->sigma_lo, 1e-4);
  for (const auto& b : scan.bifurcations)
    EXPECT_NEAR(dispersion_lambda(m, test::kRingL, b.sigma(), b.k), 0.0, 1e-3);
}

TEST(Steady, NewtonFromHomogeneousIsImmediate) {
  const Domain d = build_ring(test::kRingL, 256);
  const ModelSpec m = test::turing_model(0.0);
  const SteadyProblem P(m, d);
  const double ms = homogeneous_state(m, test::kRingL, 0.3);
  const auto r = steady_state_newton(P, 0.3, Vec::Constant(256, ms));
  EXPECT_LE(r.iterations, 2);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(Steady, HomogeneousStabilityFlips) {
  const Domain d = build_ring(test::kRingL, 512);
  const ModelSpec m = test::turing_model(0.0);
  const SteadyProblem P(m, d);
  auto at = [&](double s) {
    return steady_state_newton(P, s, Vec::Constant(512, homogeneous_state(m, test::kRingL, s)));
  };
  EXPECT_TRUE(at(0.30).stable);
  EXPECT_FALSE(at(0.40).stable);
}

TEST(Steady, UpperBranchMovesBelowSecondCrossing) {
  const Domain d = build_ring(test::kRingL, 256);
  const ModelSpec m = test::turing_model(0.0);
  const SteadyProblem P(m, d);
  std::vector<double> grid;
  for (int i = 0; i <= 120; ++i) grid.push_back(0.01 * i);
  const auto scan = turing_scan(m, test::kRingL, grid, 20);
  const Bifurcation* down = nullptr;
  for (const auto& b : scan.bifurcations)
    if (b.k == 15 && b.direction < 0) down = &b;
  ASSERT_NE(down, nullptr);
  ContinuationOptions opt;
  opt.steps = 8;
  opt.ds = 0.01;
  opt.ds_max = 0.02;
  opt.sigma_max = 1.2;
  const Branch br = continue_pattern_branch(P, d, m, down->sigma(), 15, opt);
  ASSERT_GE(br.points.size(), 5u);
  EXPECT_LT(br.points.back().sigma, down->sigma());
  EXPECT_GT(br.points.back().norm2, br.points.front().norm2);
}

// ---------------------------------------------------------------------------

TEST(Fit, ExactLine) {
  const auto f = fit_line({0, 1, 2, 3}, {2, 5, 8, 11});
  EXPECT_NEAR(f.slope, 3.0, 1e-14);
  EXPECT_NEAR(f.intercept, 2.0, 1e-14);
  EXPECT_NEAR(f.half_width, 0.0, 1e-12);
}

TEST(Fit, HalfWidthFromStudentT) {
  // Two degrees of freedom: the t quantile has the closed form (2p - 1) sqrt(2 / (4p(1 - p))).
  const std::vector<double> x{0, 1, 2, 3}, y{0.1, 0.9, 2.1, 2.9};
  const auto f = fit_line(x, y);
  double sse = 0;
  for (int i = 0; i < 4; ++i) sse += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  const double t = 0.95 * std::sqrt(2.0 / (4 * 0.975 * 0.025));
  EXPECT_NEAR(f.half_width, t * std::sqrt(sse / 2 / 5.0), 1e-10 * f.half_width);
}

TEST(Fit, LogLogSlope) {
  std::vector<double> n, e;
  for (int p = 8; p <= 14; ++p) n.push_back(std::ldexp(1.0, p)), e.push_back(3.0 / std::sqrt(n.back()));
  EXPECT_NEAR(fit_loglog(n, e).slope, -0.5, 1e-12);
}

TEST(Fit, Median) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
}

TEST(Action, HandComputedLinearPath) {
  const double sigma = 0.5, c = 0.8, T = 2.0;
  const Domain d = build_ring(1.0, 8);
  ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, sigma);
  m.L = Mat::Zero(1, 1);
  ControlledPath p;
  for (int i = 0; i <= 40; ++i) {
    p.times.push_back(T * i / 40);
    p.u.push_back(Vec::Constant(8, c * p.times.back()));
  }
  ActionOptions opt;
  opt.covariance = [](double, std::size_t) { return Mat::Zero(1, 1); };
  const auto r = action_functional(p, m, d, opt);
  EXPECT_NEAR(r.J, T * c * c / (2 * sigma * sigma), 1e-12);
}

TEST(Action, MeanFieldPathIsNearlyFree) {
  const Domain d = build_ring(test::kRingL, 64);
  ModelSpec m = test::turing_model(0.5);
  m.init.cov = [](const Point&) { return Mat::Constant(1, 1, 0.125); };
  const auto path = meanfield_path(m, d, 1.0, 200);
  EXPECT_LT(action_functional(path, m, d).J, 1e-5);
}

TEST(Action, RejectsSingularNoise) {
  const Domain d = build_ring(1.0, 8);
  const ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.0);
  ControlledPath p;
  for (int i = 0; i <= 4; ++i) p.times.push_back(i), p.u.push_back(Vec::Zero(8));
  EXPECT_THROW(action_functional(p, m, d), ConfigError);
}
