#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nfield/core.hpp"

namespace nfield {

/// Physicists' Gauss-Hermite rule: sum_i w_i g(x_i) ~ int g(x) exp(-x^2) dx.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch on the symmetric Jacobi matrix of the Hermite recurrence.
inline GaussHermiteRule compute_gauss_hermite(std::size_t n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i) / 2.0);
    jacobi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = b;
    jacobi(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(i)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mu0 = std::sqrt(kPi);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rule.nodes[i] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

/// Cached rule; safe to call concurrently.
inline const GaussHermiteRule& gauss_hermite(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, GaussHermiteRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_hermite(n)).first;
  return it->second;
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive 31-point Gauss-Kronrod on a finite panel. Bisects until the Kronrod error
/// estimate is below max(abs_tol, rel_tol |I|) or the depth budget is spent.
template <class F>
QuadResult integrate_gk(F&& f, double a, double b, double rel_tol = 1e-13, unsigned max_depth = 12,
                        double abs_tol = 1e-16) {
  QuadResult r;
  double err = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &err);
  r.error = std::abs(err);
  if (r.error <= std::max(abs_tol, rel_tol * std::abs(r.value)) || max_depth == 0) return r;
  const double mid = 0.5 * (a + b);
  const QuadResult lo = integrate_gk(f, a, mid, rel_tol, max_depth - 1, abs_tol);
  const QuadResult hi = integrate_gk(f, mid, b, rel_tol, max_depth - 1, abs_tol);
  return {lo.value + hi.value, lo.error + hi.error};
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the extrapolated
/// limit and the difference between the two most recent estimates.
inline std::pair<double, double> wynn_epsilon(const std::vector<double>& partial) {
  const std::size_t n = partial.size();
  if (n == 0) return {0.0, 0.0};
  if (n < 3) return {partial.back(), n == 2 ? std::abs(partial[1] - partial[0]) : 0.0};
  std::vector<double> prev(n + 1, 0.0), cur(partial.begin(), partial.end());
  double best = partial.back();
  double best_prev = partial[n - 2];
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> next(n - k);
    bool ok = true;
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      const double diff = cur[i + 1] - cur[i];
      if (diff == 0.0) {
        ok = false;
        break;
      }
      next[i] = prev[i + 1] + 1.0 / diff;
    }
    if (!ok) break;
    if (k % 2 == 0 && next.size() >= 2) {
      best_prev = next[next.size() - 2];
      best = next.back();
    }
    prev = cur;
    cur = next;
  }
  return {best, std::abs(best - best_prev)};
}

}  // namespace nfield
