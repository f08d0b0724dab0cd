#pragma once

// Quenched ternary random connectivity, its averaged counterpart, and the row-sum /
// operator-norm diagnostics used as surrogates for the connectivity hypotheses.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfield/core.hpp"
#include "nfield/coupling.hpp"
#include "nfield/geometry.hpp"
#include "nfield/model.hpp"
#include "nfield/rng.hpp"

namespace nfield {

/// CSR over rows (j, alpha) -> j q + alpha and columns (k, beta) -> k q + beta.
struct SampledGraph {
  std::size_t n = 0;
  int q = 1;
  double phi = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> rowptr{0};
  std::vector<std::uint32_t> col;
  std::vector<std::int8_t> val;

  std::size_t rows() const { return n * static_cast<std::size_t>(q); }
  std::size_t nnz() const { return val.size(); }
};

/// Connection probabilities p+- = |D| A+-(d(x, y)). This is the single place where the
/// domain measure enters the sampled graph, so that (1/(n phi)) sum_k K f matches the
/// Riemann sum (|D|/n) sum_k K(x, x_k) f of the mean-field integral.
class PairProbabilities {
 public:
  PairProbabilities(const Domain& d, const KernelBlocks& kernel) : d_(&d), kernel_(&kernel), q_(kernel.q) {
    scale_ = d.measure();
    if (d.kind() == DomainKind::Ring) {
      const std::size_t n = d.size();
      ring_.resize(static_cast<std::size_t>(q_ * q_));
      for (int a = 0; a < q_; ++a)
        for (int b = 0; b < q_; ++b) {
          auto& t = ring_[static_cast<std::size_t>(a * q_ + b)];
          t.resize(n);
          for (std::size_t m = 0; m < n; ++m) {
            const auto [p, s] = kernel.at(a, b).split(d.distance(0, m));
            t[m] = {scale_ * p, scale_ * s};
          }
        }
    }
  }

  std::pair<double, double> operator()(std::size_t j, std::size_t k, int a, int b) const {
    if (!ring_.empty()) {
      const std::size_t n = d_->size();
      return ring_[static_cast<std::size_t>(a * q_ + b)][(k + n - j) % n];
    }
    const auto [p, s] = kernel_->at(a, b).split(d_->distance(j, k));
    return {scale_ * p, scale_ * s};
  }

 private:
  const Domain* d_;
  const KernelBlocks* kernel_;
  int q_;
  double scale_ = 1.0;
  std::vector<std::vector<std::pair<double, double>>> ring_;
};

/// Throws ConfigError if phi * max p exceeds 1 for some block.
inline void check_probabilities(const Domain& d, const KernelBlocks& kernel, double phi) {
  if (!(phi > 0.0 && phi <= 1.0)) throw ConfigError("graph.phi_n must be in (0, 1]");
  const int q = kernel.q;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      const Kernel& K = kernel.at(a, b);
      if (K.is_zero()) continue;
      double pmax = 0.0;
      // Distance-only kernels: scan distances from node 0 (ring) or all nodes against node 0
      // and the extreme node (other domains).
      const std::size_t n = d.size();
      const std::size_t probes[2] = {0, n - 1};
      for (std::size_t j : probes)
        for (std::size_t k = 0; k < n; ++k) {
          const auto [p, m] = K.split(d.distance(j, k));
          pmax = std::max({pmax, d.measure() * p, d.measure() * m});
        }
      if (phi * pmax > 1.0 + 1e-12)
        throw ConfigError("graph: connection probability overflow for block (" + std::to_string(a) + "," +
                          std::to_string(b) + "): phi_n * max p = " + std::to_string(phi) + " * " +
                          std::to_string(pmax) + " > 1");
    }
}

/// Independent ternary draws per (j, k, alpha, beta) from counter-based streams keyed by
/// (seed, j, k); reproducible and independent of traversal order.
inline SampledGraph sample_graph(const Domain& d, const KernelBlocks& kernel, double phi, std::uint64_t seed) {
  check_probabilities(d, kernel, phi);
  const std::size_t n = d.size();
  const int q = kernel.q;
  if (n * static_cast<std::size_t>(q) > 0xFFFFFFFFull) throw ConfigError("graph too large for 32-bit column indices");
  PairProbabilities prob(d, kernel);
  const CounterRng rng(seed);
  SampledGraph g;
  g.n = n;
  g.q = q;
  g.phi = phi;
  g.seed = seed;
  const std::size_t rows = n * static_cast<std::size_t>(q);
  std::vector<std::vector<std::uint32_t>> rc(rows);
  std::vector<std::vector<std::int8_t>> rv(rows);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(n); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    for (std::size_t k = 0; k < n; ++k) {
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) {
          const auto [pp, pm] = prob(j, k, a, b);
          if (pp == 0.0 && pm == 0.0) continue;
          const double u = rng.uniforms(CounterRng::make(StreamTag::Graph, static_cast<std::uint32_t>(j), k,
                                                         static_cast<std::uint32_t>(a * q + b)))[0];
          std::int8_t v = 0;
          if (u < phi * pp) v = 1;
          else if (u < phi * (pp + pm)) v = -1;
          if (v != 0) {
            const std::size_t row = j * static_cast<std::size_t>(q) + static_cast<std::size_t>(a);
            rc[row].push_back(static_cast<std::uint32_t>(k * static_cast<std::size_t>(q) + static_cast<std::size_t>(b)));
            rv[row].push_back(v);
          }
        }
    }
  }
  g.rowptr.assign(rows + 1, 0);
  for (std::size_t r = 0; r < rows; ++r) g.rowptr[r + 1] = g.rowptr[r] + rc[r].size();
  g.col.reserve(g.rowptr.back());
  g.val.reserve(g.rowptr.back());
  for (std::size_t r = 0; r < rows; ++r) {
    g.col.insert(g.col.end(), rc[r].begin(), rc[r].end());
    g.val.insert(g.val.end(), rv[r].begin(), rv[r].end());
  }
  return g;
}

/// out = (1/(n phi)) K rates.
inline void sampled_apply(const SampledGraph& g, const Eigen::Ref<const Vec>& rates, Eigen::Ref<Vec> out) {
  const auto rows = static_cast<Eigen::Index>(g.rows());
  if (rates.size() != rows || out.size() != rows) throw ConfigError("coupling: dimension mismatch");
  const double s = 1.0 / (static_cast<double>(g.n) * g.phi);
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::uint64_t e = g.rowptr[static_cast<std::size_t>(r)]; e < g.rowptr[static_cast<std::size_t>(r) + 1]; ++e)
      acc += static_cast<double>(g.val[e]) * rates(g.col[e]);
    out(r) = s * acc;
  }
}

/// out = (1/(n phi)) K^T y.
inline void sampled_apply_transpose(const SampledGraph& g, const Eigen::Ref<const Vec>& y, Eigen::Ref<Vec> out) {
  out.setZero();
  const double s = 1.0 / (static_cast<double>(g.n) * g.phi);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::uint64_t e = g.rowptr[r]; e < g.rowptr[r + 1]; ++e) out(g.col[e]) += s * g.val[e] * y(static_cast<Eigen::Index>(r));
}

/// Either a quenched sample or the averaged kernel.
class Connectivity {
 public:
  enum class Kind { SampledSparse, AveragedDense };

  static Connectivity sampled(SampledGraph g) {
    Connectivity c;
    c.kind_ = Kind::SampledSparse;
    c.graph_ = std::make_shared<const SampledGraph>(std::move(g));
    return c;
  }
  static Connectivity averaged(const Domain& d, const KernelBlocks& kernel) {
    Connectivity c;
    c.kind_ = Kind::AveragedDense;
    c.avg_ = std::make_shared<const AveragedCoupling>(d, kernel);
    return c;
  }
  static Connectivity averaged(std::shared_ptr<const AveragedCoupling> op) {
    Connectivity c;
    c.kind_ = Kind::AveragedDense;
    c.avg_ = std::move(op);
    return c;
  }

  Kind kind() const { return kind_; }
  const SampledGraph& graph() const { return *graph_; }
  const AveragedCoupling& averaged_operator() const { return *avg_; }
  std::size_t rows() const { return kind_ == Kind::SampledSparse ? graph_->rows() : avg_->n() * static_cast<std::size_t>(avg_->q()); }

  void apply(const Eigen::Ref<const Vec>& rates, Eigen::Ref<Vec> out) const {
    if (kind_ == Kind::SampledSparse) sampled_apply(*graph_, rates, out);
    else avg_->apply(rates, out);
  }

 private:
  Kind kind_ = Kind::AveragedDense;
  std::shared_ptr<const SampledGraph> graph_;
  std::shared_ptr<const AveragedCoupling> avg_;
};

inline Vec coupling_apply(const Connectivity& c, const Eigen::Ref<const Vec>& rates) {
  if (static_cast<std::size_t>(rates.size()) != c.rows()) throw ConfigError("coupling: rates must have length n q");
  Vec out(rates.size());
  c.apply(rates, out);
  return out;
}

struct SparsityDiagnostics {
  double max_row_nnz_over_nphi = 0.0;
  double centered_opnorm_est = 0.0;
};

/// Row statistic sup_{j, alpha} sum_{k, beta} 1{K != 0} / (n phi) and a 50-step power-iteration
/// estimate of || phi^{-1} K - p ||_2 / n with p = p+ - p-.
inline SparsityDiagnostics sparsity_diagnostics(const SampledGraph& g, const Domain& d, const KernelBlocks& kernel,
                                                int iterations = 50, std::uint64_t start_seed = 12345) {
  SparsityDiagnostics out;
  std::uint64_t best = 0;
  for (std::size_t r = 0; r < g.rows(); ++r) best = std::max(best, g.rowptr[r + 1] - g.rowptr[r]);
  out.max_row_nnz_over_nphi = static_cast<double>(best) / (static_cast<double>(g.n) * g.phi);

  const AveragedCoupling avg(d, kernel);
  KernelBlocks kt(kernel.q);
  for (int a = 0; a < kernel.q; ++a)
    for (int b = 0; b < kernel.q; ++b) kt.at(a, b) = kernel.at(b, a);
  const AveragedCoupling avg_t(d, kt);

  const auto rows = static_cast<Eigen::Index>(g.rows());
  Vec x(rows), y(rows), t1(rows), t2(rows);
  PhiloxEngine eng(start_seed, static_cast<std::uint32_t>(StreamTag::Probe));
  for (Eigen::Index i = 0; i < rows; ++i) x(i) = eng.normal();
  x.normalize();
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    sampled_apply(g, x, t1);
    avg.apply(x, t2);
    y = t1 - t2;  // (1/n) M x
    sampled_apply_transpose(g, y, t1);
    avg_t.apply(y, t2);
    x = t1 - t2;  // (1/n^2) M^T M x
    const double nrm = x.norm();
    if (nrm == 0.0) {
      sigma = 0.0;
      break;
    }
    sigma = std::sqrt(nrm);
    x /= nrm;
  }
  out.centered_opnorm_est = sigma;
  return out;
}

// ---------------------------------------------------------------------------
// Binary CSR: magic "NMFT-CSR1", n u64, q u32, phi f64, seed u64, nnz u64, then
// rowptr u64[nq+1], col u32[nnz], val i8[nnz]; little-endian.

inline constexpr char kCsrMagic[9] = {'N', 'M', 'F', 'T', '-', 'C', 'S', 'R', '1'};

inline void write_csr(const SampledGraph& g, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  auto put = [&os](const void* p, std::size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
  const std::uint64_t n = g.n;
  const std::uint32_t q = static_cast<std::uint32_t>(g.q);
  const std::uint64_t nnz = g.nnz();
  put(kCsrMagic, sizeof kCsrMagic);
  put(&n, 8);
  put(&q, 4);
  put(&g.phi, 8);
  put(&g.seed, 8);
  put(&nnz, 8);
  put(g.rowptr.data(), g.rowptr.size() * 8);
  put(g.col.data(), g.col.size() * 4);
  put(g.val.data(), g.val.size());
  if (!os) throw NumericalError("write failed: " + path);
}

inline SampledGraph read_csr(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  auto get = [&is, &path](void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw ConfigError("truncated CSR file " + path);
  };
  char magic[9];
  get(magic, 9);
  if (std::memcmp(magic, kCsrMagic, 9) != 0) throw ConfigError("bad CSR magic in " + path);
  SampledGraph g;
  std::uint64_t n, nnz;
  std::uint32_t q;
  get(&n, 8);
  get(&q, 4);
  get(&g.phi, 8);
  get(&g.seed, 8);
  get(&nnz, 8);
  g.n = n;
  g.q = static_cast<int>(q);
  g.rowptr.resize(g.rows() + 1);
  g.col.resize(nnz);
  g.val.resize(nnz);
  get(g.rowptr.data(), g.rowptr.size() * 8);
  get(g.col.data(), nnz * 4);
  get(g.val.data(), nnz);
  if (g.rowptr.back() != nnz) throw ConfigError("inconsistent CSR row pointers in " + path);
  return g;
}

}  // namespace nfield
