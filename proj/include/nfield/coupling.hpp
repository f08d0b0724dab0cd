#pragma once

// Averaged (deterministic) connectivity: out_j = sum_k (|D|/n) K(x_j, x_k) r_k, i.e. the
// equal-weight quadrature of int_D K(x, y) r(y) dy. Circulant FFT on the ring, sparse rows
// of nonzero weights elsewhere.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/FFT>

#include "nfield/core.hpp"
#include "nfield/geometry.hpp"
#include "nfield/model.hpp"

namespace nfield {

class AveragedCoupling {
 public:
  AveragedCoupling() = default;

  AveragedCoupling(const Domain& domain, const KernelBlocks& kernel, bool force_dense = false)
      : n_(domain.size()), q_(kernel.q), weight_(domain.measure() / static_cast<double>(domain.size())) {
    zero_.assign(static_cast<std::size_t>(q_ * q_), true);
    for (int a = 0; a < q_; ++a)
      for (int b = 0; b < q_; ++b) zero_[idx(a, b)] = kernel.at(a, b).is_zero();
    circulant_ = domain.kind() == DomainKind::Ring && !force_dense;
    if (circulant_) build_circulant(domain, kernel);
    else build_sparse(domain, kernel);
  }

  std::size_t n() const { return n_; }
  int q() const { return q_; }
  bool circulant() const { return circulant_; }
  /// Quadrature weight |D|/n.
  double weight() const { return weight_; }

  /// out (length nq, node-major) = averaged coupling applied to rates (length nq).
  void apply(const Eigen::Ref<const Vec>& rates, Eigen::Ref<Vec> out) const {
    const auto nq = static_cast<Eigen::Index>(n_ * static_cast<std::size_t>(q_));
    if (rates.size() != nq || out.size() != nq) throw ConfigError("coupling: dimension mismatch");
    out.setZero();
    if (circulant_) {
      apply_circulant(rates, out);
      return;
    }
    for (int a = 0; a < q_; ++a)
      for (int b = 0; b < q_; ++b) {
        if (zero_[idx(a, b)]) continue;
        const auto& M = sparse_[idx(a, b)];
        for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
          double acc = 0.0;
          for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(M, j); it; ++it)
            acc += it.value() * rates(it.col() * q_ + b);
          out(j * q_ + a) += acc;
        }
      }
  }

  Vec apply(const Eigen::Ref<const Vec>& rates) const {
    Vec out(rates.size());
    apply(rates, out);
    return out;
  }

  /// Dense n x n matrix of block (a, b), including the |D|/n weight.
  Mat dense_block(int a, int b) const {
    Mat M = Mat::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    if (zero_[idx(a, b)]) return M;
    if (circulant_) {
      const auto& c = taps_[idx(a, b)];
      for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t k = 0; k < n_; ++k) M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = c[(j + n_ - k) % n_];
      return M;
    }
    return Mat(sparse_[idx(a, b)]);
  }

  /// Eigenvalues of the circulant block (a, b): mu_k = sum_d c_d exp(-2 pi i k d / n).
  std::vector<std::complex<double>> circulant_symbol(int a, int b) const {
    if (!circulant_) throw ConfigError("circulant symbol needs a ring domain");
    return spectra_[idx(a, b)];
  }

  /// Largest absolute row sum of block (a, b).
  double max_row_abs_sum(int a, int b) const {
    if (zero_[idx(a, b)]) return 0.0;
    if (circulant_) {
      double s = 0.0;
      for (double c : taps_[idx(a, b)]) s += std::abs(c);
      return s;
    }
    const auto& M = sparse_[idx(a, b)];
    double best = 0.0;
    for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
      double s = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(M, j); it; ++it) s += std::abs(it.value());
      best = std::max(best, s);
    }
    return best;
  }

 private:
  std::size_t idx(int a, int b) const { return static_cast<std::size_t>(a * q_ + b); }

  void build_circulant(const Domain& d, const KernelBlocks& kernel) {
    taps_.resize(static_cast<std::size_t>(q_ * q_));
    spectra_.resize(taps_.size());
    const double l = d.half_width();
    for (int a = 0; a < q_; ++a)
      for (int b = 0; b < q_; ++b) {
        auto& c = taps_[idx(a, b)];
        c.assign(n_, 0.0);
        if (!zero_[idx(a, b)]) {
          const Kernel& K = kernel.at(a, b);
          for (std::size_t j = 0; j < n_; ++j) {
            const double off = 2.0 * l * static_cast<double>(j) / static_cast<double>(n_);
            c[j] = weight_ * K.eval(std::min(off, 2.0 * l - off));
          }
        }
        Eigen::FFT<double> fft;
        fft.fwd(spectra_[idx(a, b)], c);
      }
  }

  void build_sparse(const Domain& d, const KernelBlocks& kernel) {
    sparse_.resize(static_cast<std::size_t>(q_ * q_));
    for (int a = 0; a < q_; ++a)
      for (int b = 0; b < q_; ++b) {
        auto& M = sparse_[idx(a, b)];
        M.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        if (zero_[idx(a, b)]) continue;
        const Kernel& K = kernel.at(a, b);
        std::map<std::int64_t, double> memo;  // keyed by rounded distance, lattice distances repeat
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t j = 0; j < n_; ++j)
          for (std::size_t k = 0; k < n_; ++k) {
            const double r = d.distance(j, k);
            const auto key = static_cast<std::int64_t>(std::llround(r * 1e9));
            auto it = memo.find(key);
            if (it == memo.end()) it = memo.emplace(key, K.eval(r)).first;
            if (it->second != 0.0)
              trip.emplace_back(static_cast<int>(j), static_cast<int>(k), weight_ * it->second);
          }
        M.setFromTriplets(trip.begin(), trip.end());
        M.makeCompressed();
      }
  }

  void apply_circulant(const Eigen::Ref<const Vec>& rates, Eigen::Ref<Vec> out) const {
    std::vector<double> comp(n_);
    std::vector<std::complex<double>> spec, prod(n_);
    std::vector<double> res;
    thread_local Eigen::FFT<double> fft;
    for (int b = 0; b < q_; ++b) {
      bool any = false;
      for (int a = 0; a < q_; ++a) any = any || !zero_[idx(a, b)];
      if (!any) continue;
      for (std::size_t k = 0; k < n_; ++k) comp[k] = rates(static_cast<Eigen::Index>(k) * q_ + b);
      fft.fwd(spec, comp);
      for (int a = 0; a < q_; ++a) {
        if (zero_[idx(a, b)]) continue;
        const auto& s = spectra_[idx(a, b)];
        for (std::size_t k = 0; k < n_; ++k) prod[k] = s[k] * spec[k];
        fft.inv(res, prod);
        for (std::size_t j = 0; j < n_; ++j) out(static_cast<Eigen::Index>(j) * q_ + a) += res[j];
      }
    }
  }

  std::size_t n_ = 0;
  int q_ = 1;
  double weight_ = 0.0;
  bool circulant_ = false;
  std::vector<bool> zero_;
  std::vector<std::vector<double>> taps_;
  std::vector<std::vector<std::complex<double>>> spectra_;
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> sparse_;
};

}  // namespace nfield
