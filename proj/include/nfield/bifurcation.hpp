#pragma once

// Homogeneous steady states, dispersion relation and Turing scans, Newton solves for
// inhomogeneous steady states on the ring, and pseudo-arclength continuation in sigma.
// All routines here are for scalar fields (q = 1) with L = L_11 > 0 and constant input.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfield/core.hpp"
#include "nfield/coupling.hpp"
#include "nfield/geometry.hpp"
#include "nfield/meanfield.hpp"
#include "nfield/model.hpp"

namespace nfield {

namespace detail {

inline void require_scalar(const ModelSpec& m) {
  if (m.q != 1) throw ConfigError("bifurcation analysis supports q = 1 only");
  if (!m.input.is_constant()) throw ConfigError("bifurcation analysis needs a constant input");
  if (!(m.L(0, 0) > 0.0)) throw ConfigError("model.L must be > 0");
}

}  // namespace detail

/// v*(sigma) for G = sigma: the scalar Lyapunov equilibrium sigma^2 / (2 L).
inline double equilibrium_variance(const ModelSpec& m, double sigma) {
  return lyapunov_equilibrium(m.L, Mat::Constant(1, 1, sigma * sigma))(0, 0);
}

/// Solves 0 = -L m + F(m, v*) int A + I by Newton from m = 0 with backtracking.
inline double homogeneous_state(const ModelSpec& model, double l, double sigma, double* kernel_integral = nullptr) {
  detail::require_scalar(model);
  const double L = model.L(0, 0);
  const double I = model.input.constant(0);
  const double S = kernel_integral ? *kernel_integral : kernel_ring_integral(model.kernel.at(0, 0), l);
  const double v = equilibrium_variance(model, sigma);
  const FiringRate& f = model.firing[0];
  auto res = [&](double m) { return -L * m + firing_moment(m, v, f) * S + I; };
  double m = 0.0;
  double r = res(m);
  for (int it = 0; it < 100; ++it) {
    if (std::abs(r) <= 1e-12) return m;
    const double J = -L + firing_moment_dm(m, v, f) * S;
    if (J == 0.0) break;
    double step = -r / J;
    double lam = 1.0;
    double mn = m + step;
    double rn = res(mn);
    while (std::abs(rn) > std::abs(r) && lam > 1e-6) {
      lam *= 0.5;
      mn = m + lam * step;
      rn = res(mn);
    }
    m = mn;
    r = rn;
  }
  if (std::abs(r) <= 1e-12) return m;
  throw RootFindError("homogeneous_state: Newton did not converge", m);
}

/// lambda_k = -L + D_mF(m*, v*) 2l A_k, with 2l A_k = int_{-l}^{l} A(x) cos(k pi x / l) dx.
inline double dispersion_lambda(const ModelSpec& model, double l, double sigma, int k) {
  detail::require_scalar(model);
  const double m = homogeneous_state(model, l, sigma);
  const double v = equilibrium_variance(model, sigma);
  return -model.L(0, 0) + firing_moment_dm(m, v, model.firing[0]) * 2.0 * l *
                              kernel_fourier_coeff(model.kernel.at(0, 0), l, k);
}

struct Bifurcation {
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
  int k = 0;
  int direction = 0;  // +1: gamma_k increases through 0
  double slope = 0.0;
  double sigma() const { return 0.5 * (sigma_lo + sigma_hi); }
};

struct DispersionScan {
  std::vector<double> sigma_grid;
  std::vector<int> k_range;
  Mat gamma;  // sigma x k
  std::vector<double> m_star;
  std::vector<Bifurcation> bifurcations;  // ascending in sigma

  /// First destabilising crossing, or nullptr.
  const Bifurcation* first() const {
    for (const auto& b : bifurcations)
      if (b.direction > 0) return &b;
    return nullptr;
  }
};

/// gamma_k(sigma) on the grid for k in [0, k_max]; every sign change is refined by bisection
/// to width <= 1e-4 and kept if the slope across the bracket exceeds 1e-6 in magnitude.
inline DispersionScan turing_scan(const ModelSpec& model, double l, const std::vector<double>& sigma_grid, int k_max,
                                  double bracket_width = 1e-4) {
  detail::require_scalar(model);
  DispersionScan scan;
  scan.sigma_grid = sigma_grid;
  for (int k = 0; k <= k_max; ++k) scan.k_range.push_back(k);
  const Kernel& K = model.kernel.at(0, 0);
  std::vector<double> coeff2l(static_cast<std::size_t>(k_max + 1));
  for (int k = 0; k <= k_max; ++k) coeff2l[static_cast<std::size_t>(k)] = 2.0 * l * kernel_fourier_coeff(K, l, k);
  double S = kernel_ring_integral(K, l);
  const double L = model.L(0, 0);
  auto gamma_at = [&](double sigma, int k, double* mstar = nullptr) {
    const double m = homogeneous_state(model, l, sigma, &S);
    if (mstar) *mstar = m;
    return -L + firing_moment_dm(m, equilibrium_variance(model, sigma), model.firing[0]) * coeff2l[static_cast<std::size_t>(k)];
  };
  const auto ns = static_cast<Eigen::Index>(sigma_grid.size());
  scan.gamma.resize(ns, k_max + 1);
  scan.m_star.resize(sigma_grid.size());
  for (Eigen::Index i = 0; i < ns; ++i) {
    double m = 0.0;
    for (int k = 0; k <= k_max; ++k) scan.gamma(i, k) = gamma_at(sigma_grid[static_cast<std::size_t>(i)], k, &m);
    scan.m_star[static_cast<std::size_t>(i)] = m;
  }
  for (int k = 0; k <= k_max; ++k)
    for (Eigen::Index i = 0; i + 1 < ns; ++i) {
      double a = sigma_grid[static_cast<std::size_t>(i)], b = sigma_grid[static_cast<std::size_t>(i + 1)];
      double ga = scan.gamma(i, k), gb = scan.gamma(i + 1, k);
      if (!(ga * gb < 0.0)) continue;
      while (b - a > bracket_width) {
        const double c = 0.5 * (a + b);
        const double gc = gamma_at(c, k);
        if (ga * gc <= 0.0) {
          b = c;
          gb = gc;
        } else {
          a = c;
          ga = gc;
        }
      }
      Bifurcation bif;
      bif.sigma_lo = a;
      bif.sigma_hi = b;
      bif.k = k;
      bif.slope = (gb - ga) / (b - a);
      bif.direction = gb > ga ? 1 : -1;
      if (std::abs(bif.slope) > 1e-6) scan.bifurcations.push_back(bif);
    }
  std::sort(scan.bifurcations.begin(), scan.bifurcations.end(),
            [](const Bifurcation& x, const Bifurcation& y) { return x.sigma_lo < y.sigma_lo; });
  return scan;
}

// ---------------------------------------------------------------------------
// Inhomogeneous steady states on the ring

/// Steady-state residual G(m; sigma) = -L m + W F(m, v*(sigma)) + I on the ring grid, with its
/// Jacobian -L + W diag(F_m).
class SteadyProblem {
 public:
  SteadyProblem(const ModelSpec& model, const Domain& d)
      : model_(&model), d_(&d), op_(std::make_shared<AveragedCoupling>(d, model.kernel)) {
    detail::require_scalar(model);
    if (d.kind() != DomainKind::Ring) throw ConfigError("steady states need a ring domain");
    W_ = op_->dense_block(0, 0);
  }

  std::size_t n() const { return d_->size(); }
  const Mat& W() const { return W_; }
  std::shared_ptr<const AveragedCoupling> op() const { return op_; }

  Vec residual(const Vec& m, double sigma) const {
    const double v = equilibrium_variance(*model_, sigma);
    Vec r(m.size()), out(m.size());
    for (Eigen::Index j = 0; j < m.size(); ++j) r(j) = firing_moment(m(j), v, model_->firing[0]);
    op_->apply(r, out);
    out.array() += -model_->L(0, 0) * m.array() + model_->input.constant(0);
    return out;
  }

  Mat jacobian(const Vec& m, double sigma) const {
    const double v = equilibrium_variance(*model_, sigma);
    Mat J = W_;
    for (Eigen::Index k = 0; k < m.size(); ++k) J.col(k) *= firing_moment_dm(m(k), v, model_->firing[0]);
    J.diagonal().array() -= model_->L(0, 0);
    return J;
  }

  Vec d_sigma(const Vec& m, double sigma) const {
    const double h = 1e-6 * std::max(1.0, std::abs(sigma));
    return (residual(m, sigma + h) - residual(m, sigma - h)) / (2.0 * h);
  }

  /// Real spectrum of the Jacobian, descending. -L + W D is similar to -L + D^{1/2} W D^{1/2}
  /// (W symmetric, D >= 0), so a symmetric solver applies.
  Vec spectrum(const Vec& m, double sigma) const {
    const double v = equilibrium_variance(*model_, sigma);
    Vec s(m.size());
    bool nonneg = true;
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double dk = firing_moment_dm(m(k), v, model_->firing[0]);
      nonneg = nonneg && dk >= 0.0;
      s(k) = std::sqrt(std::max(dk, 0.0));
    }
    Vec ev;
    if (nonneg) {
      Mat S = s.asDiagonal() * W_ * s.asDiagonal();
      S = 0.5 * (S + S.transpose());
      Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
      ev = es.eigenvalues().array() - model_->L(0, 0);
    } else {
      Eigen::EigenSolver<Mat> es(jacobian(m, sigma), false);
      ev = es.eigenvalues().real();
    }
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<double>());
    return ev;
  }

  /// Reflection x -> -x on the grid: node n/2 + i <-> n/2 - i (mod n).
  std::size_t mirror(std::size_t j) const {
    const std::size_t n = d_->size();
    return (n - j) % n;
  }

 private:
  const ModelSpec* model_;
  const Domain* d_;
  std::shared_ptr<AveragedCoupling> op_;
  Mat W_;
};

struct SteadyResult {
  Vec m;
  double sigma = 0.0;
  double residual = 0.0;
  int iterations = 0;
  Vec leading;  // leading eigenvalues, descending
  double stability = 0.0;  // leading eigenvalue, ignoring the neutral translation mode of patterns
  bool stable = false;
};

namespace detail {

// Even-symmetric subspace: unknowns are nodes 0..n/2 (x = -l .. 0), mirrored to the rest.
struct EvenBasis {
  std::size_t n;
  std::size_t r;
  explicit EvenBasis(std::size_t n_) : n(n_), r(n_ / 2 + 1) {
    if (n % 2 != 0) throw ConfigError("even-symmetric solves need an even n");
  }
  // Grid node index of the reduced unknown i.
  std::size_t node(std::size_t i) const { return i; }
  Vec expand(const Vec& z) const {
    Vec m(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = j <= n / 2 ? j : n - j;
      m(static_cast<Eigen::Index>(j)) = z(static_cast<Eigen::Index>(i));
    }
    return m;
  }
  Vec restrict_(const Vec& m) const { return m.head(static_cast<Eigen::Index>(r)); }
  // Reduced Jacobian: rows 0..n/2 of J, columns folded.
  Mat fold(const Mat& J) const {
    Mat R = Mat::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = j <= n / 2 ? j : n - j;
      R.col(static_cast<Eigen::Index>(i)) += J.block(0, static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r), 1);
    }
    return R;
  }
};

inline bool is_even(const Vec& m, double tol) {
  const auto n = static_cast<std::size_t>(m.size());
  for (std::size_t j = 1; j < n; ++j)
    if (std::abs(m(static_cast<Eigen::Index>(j)) - m(static_cast<Eigen::Index>(n - j))) > tol) return false;
  return true;
}

inline SteadyResult classify(const SteadyProblem& P, SteadyResult r, int head = 6) {
  const Vec ev = P.spectrum(r.m, r.sigma);
  r.leading = ev.head(std::min<Eigen::Index>(head, ev.size()));
  const double spread = r.m.maxCoeff() - r.m.minCoeff();
  // Nonconstant states on the ring carry a translation null vector.
  Eigen::Index i = 0;
  if (spread > 1e-8 && ev.size() > 1) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(ev.size(), 8); ++k)
      if (std::abs(ev(k)) < std::abs(ev(best))) best = k;
    if (std::abs(ev(best)) < 1e-5) i = best == 0 ? 1 : 0;
  }
  r.stability = ev(i);
  r.stable = r.stability < 0.0;
  return r;
}

}  // namespace detail

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  bool even = true;  // solve in the reflection-symmetric subspace (removes the translation mode)
};

/// Newton on G(m; sigma) = 0 from m_guess; returns the state with its leading eigenvalues.
inline SteadyResult steady_state_newton(const SteadyProblem& P, double sigma, const Vec& m_guess,
                                        const NewtonOptions& opt = {}) {
  if (static_cast<std::size_t>(m_guess.size()) != P.n()) throw ConfigError("m_guess has the wrong length");
  const bool even = opt.even && detail::is_even(m_guess, 1e-9 * std::max(1.0, m_guess.cwiseAbs().maxCoeff()));
  const detail::EvenBasis eb(P.n() % 2 == 0 ? P.n() : 2);
  Vec m = m_guess;
  Vec G = P.residual(m, sigma);
  double res = G.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opt.max_iter && res > opt.tol; ++it) {
    Vec step;
    const Mat J = P.jacobian(m, sigma);
    if (even) step = eb.expand(eb.fold(J).partialPivLu().solve(-eb.restrict_(G)));
    else step = J.partialPivLu().solve(-G);
    double lam = 1.0;
    Vec mn = m + step;
    Vec Gn = P.residual(mn, sigma);
    while (Gn.cwiseAbs().maxCoeff() > res && lam > 1e-4) {
      lam *= 0.5;
      mn = m + lam * step;
      Gn = P.residual(mn, sigma);
    }
    m = mn;
    G = Gn;
    res = G.cwiseAbs().maxCoeff();
  }
  if (!(res <= opt.tol)) throw RootFindError("steady_state_newton: residual " + std::to_string(res), res);
  SteadyResult r;
  r.m = m;
  r.sigma = sigma;
  r.residual = res;
  r.iterations = it;
  return detail::classify(P, r);
}

struct BranchPoint {
  double sigma = 0.0;
  Vec m;
  double norm2 = 0.0;  // ||m||_2 with quadrature weights
  double max_m = 0.0;
  double stability = 0.0;
  bool stable = false;
  bool fold = false;
  double residual = 0.0;
};

struct Branch {
  std::vector<BranchPoint> points;
  std::string status = "ok";
};

struct ContinuationOptions {
  int steps = 100;
  double ds = 0.05;
  double ds_min = 1e-5;
  double ds_max = 0.5;
  double tol = 1e-10;
  int max_iter = 12;
  double sigma_min = 0.0;
  double sigma_max = 2.0;
  bool even = true;
};

namespace detail {

inline BranchPoint make_point(const SteadyProblem& P, const Vec& m, double sigma, double weight) {
  SteadyResult r;
  r.m = m;
  r.sigma = sigma;
  r = classify(P, r);
  BranchPoint b;
  b.sigma = sigma;
  b.m = m;
  b.norm2 = std::sqrt(weight) * m.norm();
  b.max_m = m.maxCoeff();
  b.stability = r.stability;
  b.stable = r.stable;
  b.residual = P.residual(m, sigma).cwiseAbs().maxCoeff();
  return b;
}

}  // namespace detail

/// Pseudo-arclength continuation in (m, sigma) from two converged points p0, p1 (secant
/// predictor). The arclength uses the quadrature-weighted norm for m.
inline Branch continue_from(const SteadyProblem& P, const Vec& m0, double s0, const Vec& m1, double s1,
                            const ContinuationOptions& opt) {
  const bool even = opt.even && detail::is_even(m0, 1e-8) && detail::is_even(m1, 1e-8);
  const detail::EvenBasis eb(P.n());
  const double w = P.op()->weight();
  Branch br;
  br.points.push_back(detail::make_point(P, m0, s0, w));
  br.points.push_back(detail::make_point(P, m1, s1, w));
  Vec mp = m0, mc = m1;
  double sp = s0, sc = s1;
  double ds = opt.ds;
  const auto N = static_cast<Eigen::Index>(even ? eb.r : P.n());
  auto expand = [&](const Vec& v) { return even ? eb.expand(v) : v; };
  for (int step = 0; step < opt.steps; ++step) {
    // Secant tangent in (m, sigma) with weighted inner product.
    Vec tm = mc - mp;
    double ts = sc - sp;
    double tn = std::sqrt(w * tm.squaredNorm() + ts * ts);
    if (tn == 0.0) {
      br.status = "degenerate tangent";
      break;
    }
    tm /= tn;
    ts /= tn;
    bool ok = false;
    Vec mn;
    double sn = 0.0;
    while (!ok && ds >= opt.ds_min) {
      mn = mc + ds * tm;
      sn = sc + ds * ts;
      for (int it = 0; it < opt.max_iter; ++it) {
        const Vec G = P.residual(mn, sn);
        const double arc = w * tm.dot(mn - mc) + ts * (sn - sc) - ds;
        if (G.cwiseAbs().maxCoeff() <= opt.tol && std::abs(arc) <= opt.tol) {
          ok = true;
          break;
        }
        const Mat J = P.jacobian(mn, sn);
        const Vec Gs = P.d_sigma(mn, sn);
        Mat A(N + 1, N + 1);
        Vec rhs(N + 1);
        if (even) {
          A.topLeftCorner(N, N) = eb.fold(J);
          A.topRightCorner(N, 1) = eb.restrict_(Gs);
          Vec row = Vec::Zero(N);
          for (std::size_t j = 0; j < P.n(); ++j) {
            const std::size_t i = j <= P.n() / 2 ? j : P.n() - j;
            row(static_cast<Eigen::Index>(i)) += w * tm(static_cast<Eigen::Index>(j));
          }
          A.bottomLeftCorner(1, N) = row.transpose();
          rhs.head(N) = -eb.restrict_(G);
        } else {
          A.topLeftCorner(N, N) = J;
          A.topRightCorner(N, 1) = Gs;
          A.bottomLeftCorner(1, N) = w * tm.transpose();
          rhs.head(N) = -G;
        }
        A(N, N) = ts;
        rhs(N) = -arc;
        const Vec d = A.partialPivLu().solve(rhs);
        if (!d.allFinite()) break;
        mn += expand(d.head(N));
        sn += d(N);
      }
      if (!ok) ds *= 0.5;
    }
    if (!ok) {
      br.status = "corrector failed";
      break;
    }
    if (sn < opt.sigma_min || sn > opt.sigma_max) {
      br.status = "left sigma range";
      break;
    }
    BranchPoint pt = detail::make_point(P, mn, sn, w);
    const double prev_dir = sc - sp;
    const double dir = sn - sc;
    if (prev_dir * dir < 0.0) br.points.back().fold = true;
    br.points.push_back(std::move(pt));
    mp = mc;
    sp = sc;
    mc = mn;
    sc = sn;
    ds = std::min(opt.ds_max, ds * 1.3);
  }
  return br;
}

/// Continuation of the homogeneous branch from sigma0 in the given direction (+1/-1).
inline Branch continue_branch(const SteadyProblem& P, const ModelSpec& model, double l, double sigma0, int direction,
                              const ContinuationOptions& opt) {
  const double m0 = homogeneous_state(model, l, sigma0);
  const auto n = static_cast<Eigen::Index>(P.n());
  const double s1 = sigma0 + direction * opt.ds;
  const Vec a = steady_state_newton(P, sigma0, Vec::Constant(n, m0)).m;
  const Vec b = steady_state_newton(P, s1, a).m;
  return continue_from(P, a, sigma0, b, s1, opt);
}

struct PatternSeed {
  Vec m;
  double sigma = 0.0;
};

/// A point on the branch bifurcating from the homogeneous state at (sigma_c, k): solves
/// G(m, sigma) = 0 together with <m - m*, cos(k pi x/l)> = delta <cos, cos>.
inline PatternSeed pattern_seed(const SteadyProblem& P, const Domain& d, const ModelSpec& model, double sigma_c, int k,
                                double delta = 1e-2, double tol = 1e-10) {
  const double l = d.half_width();
  const double ms = homogeneous_state(model, l, sigma_c);
  const auto n = static_cast<Eigen::Index>(P.n());
  Vec phi(n);
  for (Eigen::Index j = 0; j < n; ++j) phi(j) = std::cos(k * kPi * d.node(static_cast<std::size_t>(j)).x / l);
  const double pp = phi.squaredNorm();
  Vec m = Vec::Constant(n, ms) + delta * phi;
  double s = sigma_c;
  const detail::EvenBasis eb(P.n());
  const auto N = static_cast<Eigen::Index>(eb.r);
  for (int it = 0; it < 60; ++it) {
    const Vec G = P.residual(m, s);
    const double c = phi.dot(m - Vec::Constant(n, ms)) - delta * pp;
    if (G.cwiseAbs().maxCoeff() <= tol && std::abs(c) <= tol * pp) return {m, s};
    Mat A(N + 1, N + 1);
    Vec rhs(N + 1);
    A.topLeftCorner(N, N) = eb.fold(P.jacobian(m, s));
    A.topRightCorner(N, 1) = eb.restrict_(P.d_sigma(m, s));
    Vec row = Vec::Zero(N);
    for (std::size_t j = 0; j < P.n(); ++j) {
      const std::size_t i = j <= P.n() / 2 ? j : P.n() - j;
      row(static_cast<Eigen::Index>(i)) += phi(static_cast<Eigen::Index>(j));
    }
    A.bottomLeftCorner(1, N) = row.transpose();
    A(N, N) = 0.0;
    rhs.head(N) = -eb.restrict_(G);
    rhs(N) = -c;
    const Vec dlt = A.fullPivLu().solve(rhs);
    m += eb.expand(dlt.head(N));
    s += dlt(N);
  }
  throw RootFindError("pattern_seed: Newton did not converge", s);
}

/// Branch emerging from the Turing point (sigma_c, k): seeds at amplitudes delta and 2 delta,
/// then pseudo-arclength continuation.
inline Branch continue_pattern_branch(const SteadyProblem& P, const Domain& d, const ModelSpec& model, double sigma_c,
                                      int k, const ContinuationOptions& opt, double delta = 1e-2) {
  const PatternSeed a = pattern_seed(P, d, model, sigma_c, k, delta);
  const PatternSeed b = pattern_seed(P, d, model, sigma_c, k, 2.0 * delta);
  return continue_from(P, a.m, a.sigma, b.m, b.sigma, opt);
}

}  // namespace nfield
