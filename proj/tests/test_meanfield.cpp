#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nfield/meanfield.hpp"
#include "support.hpp"

using namespace nfield;

TEST(MeanField, ZeroKernelIsLinearDecay) {
  const Domain d = build_ring(2.0, 16);
  ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.3, [](double x) { return std::sin(x); });
  m.L = Mat::Constant(1, 1, 1.7);
  const auto s = meanfield_initial(m, d);
  const auto [dm, dV] = mf_rhs(s, m, d);
  EXPECT_LT((dm + 1.7 * s.m).cwiseAbs().maxCoeff(), 1e-15);
  for (Eigen::Index j = 0; j < dV.size(); ++j) EXPECT_DOUBLE_EQ(dV(j), 0.09);
}

TEST(MeanField, ScalarVarianceFlow) {
  const Domain d = build_ring(1.0, 4);
  const double sigma = 0.6, V0 = 0.5;
  ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, sigma);
  m.init.cov = [V0](const Point&) { return Mat::Constant(1, 1, V0); };
  const auto out = mf_integrate(m, d, 2.0, OdeSolver::rk45(1e-10, 1e-12), {0.5, 2.0});
  for (const auto& s : out) {
    const double expect = sigma * sigma / 2 + (V0 - sigma * sigma / 2) * std::exp(-2 * s.t);
    EXPECT_NEAR(s.var(0, 0), expect, 1e-9);
  }
}

TEST(MeanField, LinearMeanDecay) {
  const Domain d = build_ring(1.0, 4);
  const ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.0, [](double) { return 1.0; });
  for (const auto& solver : {OdeSolver::rk4(1e-3), OdeSolver::rk45(1e-9, 1e-12)}) {
    const auto out = mf_integrate(m, d, 3.0, solver);
    EXPECT_NEAR(out.back().m(0), std::exp(-3.0), 1e-8);
  }
}

TEST(MeanField, CirculantMatchesDenseQuadrature) {
  const std::size_t n = 200;
  const Domain d = build_ring(test::kRingL, n);
  const Kernel k = Kernel::gaussian_diff(1.5, 7.0);
  const AveragedCoupling op(d, KernelBlocks::scalar(k));
  ASSERT_TRUE(op.circulant());
  std::mt19937_64 gen(3);
  std::normal_distribution<double> N;
  Vec r = Vec::Zero(static_cast<Eigen::Index>(n));
  for (int mode = 0; mode < 6; ++mode) {
    const double a = N(gen), b = N(gen);
    for (std::size_t j = 0; j < n; ++j) {
      const double x = d.node(j).x * mode * kPi / test::kRingL;
      r(static_cast<Eigen::Index>(j)) += a * std::cos(x) + b * std::sin(x);
    }
  }
  const Vec fast = op.apply(r);
  const double w = d.measure() / n;
  for (std::size_t j = 0; j < n; ++j) {
    double dense = 0.0;
    for (std::size_t i = 0; i < n; ++i) dense += w * k.eval(d.distance(j, i)) * r(static_cast<Eigen::Index>(i));
    EXPECT_NEAR(fast(static_cast<Eigen::Index>(j)), dense, 1e-10);
  }
}

TEST(MeanField, VarianceIgnoresMean) {
  const Domain d = build_ring(test::kRingL, 64);
  const ModelSpec m = test::turing_model(0.58);
  auto s = meanfield_initial(m, d);
  s.V.setConstant(0.1);
  const auto [dm1, dV1] = mf_rhs(s, m, d);
  std::reverse(s.m.data(), s.m.data() + s.m.size());
  const auto [dm2, dV2] = mf_rhs(s, m, d);
  EXPECT_EQ(dV1, dV2);
}

TEST(MeanField, Rk4AgreesWithRk45) {
  const Domain d = build_ring(test::kRingL, 256);
  const ModelSpec m = test::turing_model(0.58);
  const auto a = mf_integrate(m, d, 10.0, OdeSolver::rk4(1e-3));
  const auto b = mf_integrate(m, d, 10.0, OdeSolver::rk45(1e-8, 1e-10));
  EXPECT_LT((a.back().m - b.back().m).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((a.back().V - b.back().V).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MeanField, GridRefinementIsSpectral) {
  const ModelSpec m = test::turing_model(0.58);
  const auto solver = OdeSolver::rk45(1e-11, 1e-13);
  std::vector<Vec> ms;
  for (std::size_t n : {256, 512, 1024}) ms.push_back(mf_integrate(m, build_ring(test::kRingL, n), 5.0, solver).back().m);
  const double e256 = (ring_resample(ms[1], 256) - ms[0]).cwiseAbs().maxCoeff();
  const double e512 = (ring_resample(ms[2], 512) - ms[1]).cwiseAbs().maxCoeff();
  EXPECT_LT(e256, 1e-7);
  EXPECT_LT(e512, 1e-8);
  EXPECT_LT(e512, 1e-3 * e256);
}

// ---------------------------------------------------------------------------

TEST(Lyapunov, Scalar) {
  for (double s : {0.0, 0.45, 1.0})
    EXPECT_NEAR(lyapunov_equilibrium(Mat::Identity(1, 1), Mat::Constant(1, 1, s * s))(0, 0), s * s / 2, 1e-15);
}

TEST(Lyapunov, IdentityBlocks) {
  const Mat V = lyapunov_equilibrium(Mat::Identity(3, 3), Mat::Identity(3, 3));
  EXPECT_LT((V - 0.5 * Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Lyapunov, RandomStableResidual) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Mat L(2, 2), G(2, 2);
    for (int i = 0; i < 4; ++i) L.data()[i] = U(gen), G.data()[i] = U(gen);
    L += (0.3 - min_real_eigenvalue(L)) * Mat::Identity(2, 2);
    const Mat Q = G * G.transpose();
    const Mat V = lyapunov_equilibrium(L, Q);
    EXPECT_LT((L * V + V * L.transpose() - Q).norm(), 1e-12);
  }
}

TEST(Lyapunov, RejectsUnstableL) {
  EXPECT_THROW(lyapunov_equilibrium(Mat::Constant(1, 1, -1.0), Mat::Identity(1, 1)), ConfigError);
}

TEST(Contraction, ScalarAndNormal) {
  const auto r1 = variance_contraction_rate(Mat::Identity(1, 1));
  EXPECT_DOUBLE_EQ(r1.epsilon, 2.0);
  Mat S(2, 2);
  S << 1.0, 0.3, 0.3, 2.0;
  const auto r2 = variance_contraction_rate(S);
  EXPECT_NEAR(r2.beta, 1.0, 1e-10);
}

TEST(Contraction, NonnormalDecayRate) {
  Mat L(2, 2);
  L << 0.3, 1.0, 0.0, 1.0;
  const auto rate = variance_contraction_rate(L);
  const Domain d = build_ring(1.0, 2);
  ModelSpec m;
  m.q = 2;
  m.L = L;
  m.firing = {FiringRate::zero(), FiringRate::zero()};
  m.kernel = KernelBlocks(2);
  m.input.constant = Vec::Zero(2);
  m.noise.constant = Mat::Identity(2, 2);
  m.init.mean = [](const Point&) { return Vec::Zero(2); };
  m.init.cov = [](const Point&) { return Mat::Identity(2, 2) * 3.0; };
  std::vector<double> ts, logs;
  for (int i = 0; i <= 15; ++i) ts.push_back(5.0 + i);
  const Mat Vs = lyapunov_equilibrium(L, Mat::Identity(2, 2));
  for (const auto& s : mf_integrate(m, d, 20.0, OdeSolver::rk45(1e-12, 1e-16), ts))
    logs.push_back(std::log((s.cov(0) - Vs).norm()));
  double mx = 0, my = 0, sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) mx += ts[i], my += logs[i];
  mx /= ts.size(), my /= ts.size();
  for (std::size_t i = 0; i < ts.size(); ++i) sxy += (ts[i] - mx) * (logs[i] - my), sxx += (ts[i] - mx) * (ts[i] - mx);
  EXPECT_LE(sxy / sxx, -rate.epsilon + 0.01);
}

TEST(RingUtilities, ResampleAndDominantMode) {
  const Domain d = build_ring(2.0, 24);
  Vec g(24);
  for (Eigen::Index j = 0; j < 24; ++j) g(j) = 0.2 + std::cos(3 * kPi * d.node(static_cast<std::size_t>(j)).x / 2.0);
  EXPECT_EQ(dominant_mode(g), 3);
  const Domain f = build_ring(2.0, 40);
  const Vec h = ring_resample(g, 40);
  for (Eigen::Index j = 0; j < 40; ++j)
    EXPECT_NEAR(h(j), 0.2 + std::cos(3 * kPi * f.node(static_cast<std::size_t>(j)).x / 2.0), 1e-13);
  EXPECT_NEAR(ring_mode_integral(d, g, 3).real(), 2.0, 1e-13);
}
