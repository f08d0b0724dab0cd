#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "nfield/graph.hpp"
#include "nfield/particle.hpp"
#include "support.hpp"

using namespace nfield;

namespace {

KernelBlocks constant_blocks(double c) { return KernelBlocks::scalar(Kernel::constant(c)); }

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nfield_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Graph, AllOnes) {
  const Domain d = build_ring(2.0, 50);
  const auto g = sample_graph(d, constant_blocks(1.0 / d.measure()), 1.0, 3);
  EXPECT_EQ(g.nnz(), 50u * 50u);
  for (auto v : g.val) EXPECT_EQ(v, 1);
  Vec r = Vec::LinSpaced(50, 0.0, 1.0), out(50);
  sampled_apply(g, r, out);
  for (Eigen::Index j = 0; j < 50; ++j) EXPECT_NEAR(out(j), r.mean(), 1e-14);
}

TEST(Graph, EmptyForZeroKernel) {
  const Domain d = build_ring(2.0, 40);
  EXPECT_EQ(sample_graph(d, KernelBlocks::scalar(Kernel::zero()), 0.5, 1).nnz(), 0u);
}

TEST(Graph, BernoulliFrequencies) {
  // Block (0,0) excitatory with p+ = 0.5, block (0,1) inhibitory with p- = 0.25.
  const std::size_t n = 2000;
  const double phi = 0.1;
  const Domain d = build_ring(1.0, n);
  KernelBlocks k(2);
  k.at(0, 0) = Kernel::constant(0.5 / d.measure());
  k.at(0, 1) = Kernel::constant(-0.25 / d.measure());
  const auto g = sample_graph(d, k, phi, 11);
  double plus = 0, minus = 0, other = 0;
  for (std::size_t row = 0; row < g.rows(); ++row)
    for (auto i = g.rowptr[row]; i < g.rowptr[row + 1]; ++i) {
      const bool a0 = row % 2 == 0, b0 = g.col[i] % 2 == 0;
      if (a0 && b0 && g.val[i] == 1) ++plus;
      else if (a0 && !b0 && g.val[i] == -1) ++minus;
      else ++other;
    }
  const double N = static_cast<double>(n * n);
  auto z = [N](double count, double p) { return (count - N * p) / std::sqrt(N * p * (1 - p)); };
  EXPECT_LT(std::abs(z(plus, phi * 0.5)), 5.0);
  EXPECT_LT(std::abs(z(minus, phi * 0.25)), 5.0);
  EXPECT_EQ(other, 0.0);
}

TEST(Graph, ProbabilityOverflowRejected) {
  const Domain d = build_ring(1.0, 20);
  EXPECT_THROW(sample_graph(d, constant_blocks(2.0 / d.measure()), 0.6, 1), ConfigError);
  EXPECT_THROW(sample_graph(d, constant_blocks(0.1), 0.0, 1), ConfigError);
}

TEST(Graph, SeedDeterminism) {
  const Domain d = build_ring(test::kRingL, 200);
  const auto k = KernelBlocks::scalar(Kernel::gaussian_diff(1.5, 0.4));
  const auto a = sample_graph(d, k, 0.2, 5), b = sample_graph(d, k, 0.2, 5), c = sample_graph(d, k, 0.2, 6);
  EXPECT_EQ(a.rowptr, b.rowptr);
  EXPECT_EQ(a.col, b.col);
  EXPECT_EQ(a.val, b.val);
  EXPECT_NE(a.col, c.col);
}

TEST(Graph, CsrRoundTrip) {
  const Domain d = build_ring(test::kRingL, 150);
  const auto g = sample_graph(d, KernelBlocks::scalar(Kernel::gaussian_diff(1.5, 0.4)), 0.2, 9);
  const auto p = temp_path("g.csr");
  write_csr(g, p.string());
  const auto h = read_csr(p.string());
  std::filesystem::remove(p);
  EXPECT_EQ(h.n, g.n);
  EXPECT_EQ(h.q, g.q);
  EXPECT_EQ(h.phi, g.phi);
  EXPECT_EQ(h.seed, g.seed);
  EXPECT_EQ(h.rowptr, g.rowptr);
  EXPECT_EQ(h.col, g.col);
  EXPECT_EQ(h.val, g.val);
}

TEST(Graph, ReadRejectsGarbage) {
  const auto p = temp_path("bad.csr");
  { std::ofstream(p) << "not a graph"; }
  EXPECT_ANY_THROW(read_csr(p.string()));
  std::filesystem::remove(p);
}

TEST(Graph, DiagnosticsOfCompleteGraph) {
  const Domain d = build_ring(1.0, 64);
  const auto k = constant_blocks(1.0 / d.measure());
  const auto diag = sparsity_diagnostics(sample_graph(d, k, 1.0, 1), d, k);
  EXPECT_DOUBLE_EQ(diag.max_row_nnz_over_nphi, 1.0);
  EXPECT_LT(diag.centered_opnorm_est, 1e-12);
}

TEST(Graph, SampledMeanMatchesAveraged) {
  // Averaging the sampled operator over seeds approaches the Riemann-sum operator.
  const Domain d = build_ring(test::kRingL, 128);
  const auto k = KernelBlocks::scalar(Kernel::gaussian_diff(1.5, 0.1));
  const AveragedCoupling avg(d, k);
  Vec r(128), out(128), acc = Vec::Zero(128);
  for (Eigen::Index j = 0; j < 128; ++j) r(j) = 0.5 + 0.5 * std::sin(0.3 * j);
  const int seeds = 200;
  for (int s = 1; s <= seeds; ++s) {
    sampled_apply(sample_graph(d, k, 0.5, static_cast<std::uint64_t>(s)), r, out);
    acc += out;
  }
  acc /= seeds;
  EXPECT_LT((acc - avg.apply(r)).cwiseAbs().maxCoeff(), 5e-3);
}

// ---------------------------------------------------------------------------

TEST(Particle, LinearDecayIsExactEuler) {
  const Domain d = build_ring(1.0, 8);
  ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.0, [](double) { return 1.0; });
  const auto conn = Connectivity::averaged(d, m.kernel);
  const double dt = 0.01;
  const auto path = simulate(m, d, conn, 1.0, dt, 1, {0.0, 1.0});
  ASSERT_EQ(path.snapshots.size(), 2u);
  const double expect = std::pow(1.0 - dt, 100);
  for (Eigen::Index j = 0; j < 8; ++j) EXPECT_NEAR(path.snapshots[1](j), expect, 1e-14);
}

TEST(Particle, BrownianVariance) {
  const std::size_t n = 20000;
  const Domain d = build_ring(1.0, n);
  ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.7);
  m.L = Mat::Zero(1, 1);
  const auto conn = Connectivity::averaged(d, m.kernel);
  const auto path = simulate(m, d, conn, 2.0, 0.01, 4, {2.0});
  const Vec& u = path.snapshots[0];
  const double mean = u.mean();
  const double var = (u.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double expect = 0.49 * 2.0;
  EXPECT_LT(std::abs(mean), 5 * std::sqrt(expect / n));
  EXPECT_LT(std::abs(var - expect), 5 * expect * std::sqrt(2.0 / n));
}

TEST(Particle, SameSeedSamePath) {
  const Domain d = build_ring(test::kRingL, 64);
  const ModelSpec m = test::turing_model(0.58);
  const auto conn = Connectivity::averaged(d, m.kernel);
  const auto a = simulate(m, d, conn, 1.0, 0.01, 7, {1.0});
  const auto b = simulate(m, d, conn, 1.0, 0.01, 7, {1.0});
  const auto c = simulate(m, d, conn, 1.0, 0.01, 8, {1.0});
  EXPECT_EQ(a.snapshots[0], b.snapshots[0]);
  EXPECT_NE(a.snapshots[0], c.snapshots[0]);
}

TEST(Particle, SaveTimesValidated) {
  const Domain d = build_ring(1.0, 4);
  const ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.0);
  const auto conn = Connectivity::averaged(d, m.kernel);
  EXPECT_THROW(simulate(m, d, conn, 1.0, 0.01, 1, {2.0}), ConfigError);
  EXPECT_THROW(simulate(m, d, conn, 1.0, 0.01, 1, {0.5, 0.2}), ConfigError);
  EXPECT_THROW(simulate(m, d, conn, 1.0, 0.01, 1, {0.005}), ConfigError);
}

TEST(Particle, DivergenceRaisesIntegrationError) {
  const Domain d = build_ring(1.0, 4);
  ModelSpec m = test::scalar_model(Kernel::zero(), 1.0, 0.0, 0.0, [](double) { return 1.0; });
  m.L = Mat::Constant(1, 1, -500.0);
  const auto conn = Connectivity::averaged(d, m.kernel);
  EXPECT_THROW(simulate(m, d, conn, 10.0, 0.01, 1, {10.0}), IntegrationError);
}

TEST(Particle, MomentsOfConstantAndCosine) {
  const double l = 3.0;
  const Domain d = build_ring(l, 32);
  const Vec c = Vec::Constant(32, 2.0);
  const auto mc = snapshot_moments(c, d, 1, 4);
  EXPECT_NEAR(mc.m(0, 0).real(), 2.0, 1e-14);
  EXPECT_NEAR(mc.s(0, 0, 0).real(), 4.0, 1e-14);
  for (int k = 1; k <= 4; ++k) EXPECT_LT(std::abs(mc.m(k, 0)), 1e-13);
  Vec cs(32);
  for (Eigen::Index j = 0; j < 32; ++j) cs(j) = std::cos(kPi * d.node(static_cast<std::size_t>(j)).x / l);
  const auto mcos = snapshot_moments(cs, d, 1, 4);
  EXPECT_NEAR(mcos.m(1, 0).real(), 0.5, 1e-14);
  EXPECT_NEAR(mcos.m(1, 0).imag(), 0.0, 1e-14);
  EXPECT_LT(std::abs(mcos.m(2, 0)), 1e-14);
}
