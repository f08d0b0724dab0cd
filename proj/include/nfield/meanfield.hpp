#pragma once

// Gaussian mean-field system on the node grid:
//   dm/dt = -L m + int_D K(x, y) F(m(y), V(y)) dy + I,   dV/dt = -L V - V L^T + G G^T.

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include "nfield/core.hpp"
#include "nfield/coupling.hpp"
#include "nfield/geometry.hpp"
#include "nfield/model.hpp"
#include "nfield/ode.hpp"

namespace nfield {

inline int tri_size(int q) { return q * (q + 1) / 2; }

/// Packs the upper triangle row by row: (0,0), (0,1), ..., (1,1), ...
inline Eigen::VectorXd pack_upper(const Mat& V) {
  const int q = static_cast<int>(V.rows());
  Eigen::VectorXd t(tri_size(q));
  int p = 0;
  for (int a = 0; a < q; ++a)
    for (int b = a; b < q; ++b) t(p++) = V(a, b);
  return t;
}

inline Mat unpack_upper(const Eigen::Ref<const Eigen::VectorXd>& t, int q) {
  Mat V(q, q);
  int p = 0;
  for (int a = 0; a < q; ++a)
    for (int b = a; b < q; ++b) {
      V(a, b) = t(p);
      V(b, a) = t(p);
      ++p;
    }
  return V;
}

struct MeanFieldState {
  double t = 0.0;
  int q = 1;
  Vec m;  // n q, node-major
  Vec V;  // n q(q+1)/2, packed upper triangles

  std::size_t n() const { return static_cast<std::size_t>(m.size() / q); }
  Mat cov(std::size_t j) const {
    const int ts = tri_size(q);
    return unpack_upper(V.segment(static_cast<Eigen::Index>(j) * ts, ts), q);
  }
  double var(std::size_t j, int a) const { return cov(j)(a, a); }
};

inline MeanFieldState meanfield_initial(const ModelSpec& model, const Domain& d) {
  const int q = model.q;
  const int ts = tri_size(q);
  MeanFieldState s;
  s.q = q;
  s.m.resize(static_cast<Eigen::Index>(d.size()) * q);
  s.V.resize(static_cast<Eigen::Index>(d.size()) * ts);
  for (std::size_t j = 0; j < d.size(); ++j) {
    s.m.segment(static_cast<Eigen::Index>(j) * q, q) = model.init.mean(d.node(j));
    s.V.segment(static_cast<Eigen::Index>(j) * ts, ts) = pack_upper(model.init.cov(d.node(j)));
  }
  return s;
}

/// Right-hand side evaluator with a reusable coupling operator.
class MeanFieldRhs {
 public:
  MeanFieldRhs(const ModelSpec& model, const Domain& d)
      : MeanFieldRhs(model, d, std::make_shared<const AveragedCoupling>(d, model.kernel)) {}
  MeanFieldRhs(const ModelSpec& model, const Domain& d, std::shared_ptr<const AveragedCoupling> op)
      : model_(&model), d_(&d), op_(std::move(op)) {
    validate_model(model);
  }

  const AveragedCoupling& coupling() const { return *op_; }

  /// Firing moments F(m_{j,b}, V_{j,bb}) into r.
  void rates(const Vec& m, const Vec& V, Vec& r) const {
    const int q = model_->q;
    const int ts = tri_size(q);
    const auto n = static_cast<Eigen::Index>(d_->size());
    r.resize(m.size());
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < n; ++j) {
      int diag = 0;
      for (int a = 0; a < q; ++a) {
        r(j * q + a) = firing_moment(m(j * q + a), std::max(0.0, V(j * ts + diag)), model_->firing[static_cast<std::size_t>(a)]);
        diag += q - a;
      }
    }
  }

  void operator()(double t, const MeanFieldState& s, Vec& dm, Vec& dV) const {
    const int q = model_->q;
    const int ts = tri_size(q);
    const auto n = static_cast<Eigen::Index>(d_->size());
    dm.resize(s.m.size());
    dV.resize(s.V.size());
    if (model_->kernel.all_zero()) dm.setZero();
    else {
      Vec r;
      rates(s.m, s.V, r);
      op_->apply(r, dm);
    }
    const Mat& L = model_->L;
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Point& x = d_->node(static_cast<std::size_t>(j));
      auto dmj = dm.segment(j * q, q);
      dmj += -L * s.m.segment(j * q, q) + model_->input(t, x);
      const Mat V = unpack_upper(s.V.segment(j * ts, ts), q);
      const Mat G = model_->noise(t, x);
      const Mat dVj = -L * V - V * L.transpose() + G * G.transpose();
      dV.segment(j * ts, ts) = pack_upper(dVj);
    }
  }

  /// Packed ODE vector [m; V].
  void flat(double t, const Vec& y, Vec& dy) const {
    const auto nm = static_cast<Eigen::Index>(d_->size()) * model_->q;
    MeanFieldState s;
    s.q = model_->q;
    s.m = y.head(nm);
    s.V = y.tail(y.size() - nm);
    Vec dm, dV;
    (*this)(t, s, dm, dV);
    dy.resize(y.size());
    dy.head(nm) = dm;
    dy.tail(y.size() - nm) = dV;
  }

 private:
  const ModelSpec* model_;
  const Domain* d_;
  std::shared_ptr<const AveragedCoupling> op_;
};

inline std::pair<Vec, Vec> mf_rhs(const MeanFieldState& s, const ModelSpec& model, const Domain& d) {
  MeanFieldRhs f(model, d);
  Vec dm, dV;
  f(s.t, s, dm, dV);
  return {dm, dV};
}

/// Integrates from the model's initial law (or `initial`) and returns the states at save_times
/// (defaults to {T}).
inline std::vector<MeanFieldState> mf_integrate(const ModelSpec& model, const Domain& d, double T, const OdeSolver& solver,
                                                std::vector<double> save_times = {},
                                                const MeanFieldState* initial = nullptr,
                                                std::shared_ptr<const AveragedCoupling> op = nullptr) {
  if (!(T > 0.0)) throw ConfigError("run.T must be > 0");
  if (save_times.empty()) save_times = {T};
  const MeanFieldRhs f = op ? MeanFieldRhs(model, d, op) : MeanFieldRhs(model, d);
  const MeanFieldState s0 = initial ? *initial : meanfield_initial(model, d);
  Vec y(s0.m.size() + s0.V.size());
  y << s0.m, s0.V;
  const OdeRhs rhs = [&f](double t, const Vec& yy, Vec& dy) { f.flat(t, yy, dy); };
  const auto res = ode_integrate(rhs, s0.t, y, save_times, solver);
  std::vector<MeanFieldState> out;
  const Eigen::Index nm = s0.m.size();
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    MeanFieldState s;
    s.t = res.times[i];
    s.q = model.q;
    s.m = res.states[i].head(nm);
    s.V = res.states[i].tail(res.states[i].size() - nm);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covariance equilibrium

inline double min_real_eigenvalue(const Mat& L) {
  Eigen::EigenSolver<Mat> es(L);
  return es.eigenvalues().real().minCoeff();
}

/// Solves L V + V L^T = GG^T through the q^2 x q^2 system (I (x) L + L (x) I) vec V = vec GG^T.
inline Mat lyapunov_equilibrium(const Mat& L, const Mat& GGt) {
  const auto q = L.rows();
  if (L.cols() != q || GGt.rows() != q || GGt.cols() != q) throw ConfigError("lyapunov: dimension mismatch");
  if (!(min_real_eigenvalue(L) > 0.0))
    throw ConfigError("model.L must have all eigenvalues in the open right half-plane");
  const Mat I = Mat::Identity(q, q);
  Mat M(q * q, q * q);
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b) M.block(a * q, b * q, q, q) = I(a, b) * L + L(a, b) * I;
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) throw NumericalError("lyapunov: no unique equilibrium (singular I(x)L + L(x)I)");
  const Eigen::Map<const Vec> rhs(GGt.data(), q * q);
  Vec v = lu.solve(Vec(rhs));
  // One step of iterative refinement.
  v += lu.solve(Vec(rhs) - M * v);
  Mat V = Eigen::Map<Mat>(v.data(), q, q);
  return 0.5 * (V + V.transpose());
}

struct ContractionRate {
  double beta = 1.0;
  double epsilon = 0.0;
};

/// Constants in ||V(t) - V*|| <= beta exp(-epsilon t) ||V0 - V*|| for the flow dV = -(LV + VL^T).
/// epsilon = 2 min Re sigma(L); beta = 1 for normal L, else the eigenvector condition number of I(x)L + L(x)I when it
/// is diagonalisable, otherwise epsilon is reduced by 1% and beta = sup_t ||exp(-Mt)|| e^{epsilon t}.
inline ContractionRate variance_contraction_rate(const Mat& L) {
  const double lam = min_real_eigenvalue(L);
  if (!(lam > 0.0)) throw ConfigError("model.L must have all eigenvalues in the open right half-plane");
  const auto q = L.rows();
  const Mat I = Mat::Identity(q, q);
  Mat M(q * q, q * q);
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b) M.block(a * q, b * q, q, q) = I(a, b) * L + L(a, b) * I;
  ContractionRate out;
  out.epsilon = 2.0 * lam;
  if ((L * L.transpose() - L.transpose() * L).norm() <= 1e-12 * std::max(1.0, L.squaredNorm())) return out;
  Eigen::ComplexEigenSolver<Mat> es(M);
  const Eigen::MatrixXcd P = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(P);
  const double smin = svd.singularValues().minCoeff();
  const double kappa = smin > 0.0 ? svd.singularValues().maxCoeff() / smin : std::numeric_limits<double>::infinity();
  if (kappa < 1e8) {
    out.beta = kappa;
    return out;
  }
  out.epsilon = 0.99 * 2.0 * lam;
  double beta = 1.0;
  const double horizon = 40.0 / out.epsilon;
  for (int i = 1; i <= 400; ++i) {
    const double t = horizon * i / 400.0;
    const Mat E = (-M * t).exp();
    Eigen::JacobiSVD<Mat> s(E);
    beta = std::max(beta, s.singularValues()(0) * std::exp(out.epsilon * t));
  }
  out.beta = beta;
  return out;
}

// ---------------------------------------------------------------------------
// Ring utilities

/// Samples of a ring-periodic field on n_old equispaced nodes resampled to n_new nodes of the
/// same ring: subsampling when n_new divides n_old, spectral zero padding otherwise.
inline Vec ring_resample(const Vec& values, std::size_t n_new) {
  const auto n_old = static_cast<std::size_t>(values.size());
  if (n_new == n_old) return values;
  Vec out(static_cast<Eigen::Index>(n_new));
  if (n_old % n_new == 0) {
    const std::size_t s = n_old / n_new;
    for (std::size_t j = 0; j < n_new; ++j) out(static_cast<Eigen::Index>(j)) = values(static_cast<Eigen::Index>(j * s));
    return out;
  }
  if (n_new < n_old) throw ConfigError("ring_resample: cannot coarsen to a non-divisor size");
  Eigen::FFT<double> fft;
  std::vector<double> in(values.data(), values.data() + n_old);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, in);
  std::vector<std::complex<double>> big(n_new, 0.0);
  const std::size_t half = n_old / 2;
  for (std::size_t k = 0; k < half; ++k) big[k] = spec[k];
  for (std::size_t k = 1; k < half; ++k) big[n_new - k] = spec[n_old - k];
  if (n_old % 2 == 0) {
    big[half] = 0.5 * spec[half];
    big[n_new - half] = 0.5 * spec[half];
  } else {
    big[half] = spec[half];
    big[n_new - half] = spec[n_old - half];
  }
  std::vector<double> res;
  fft.inv(res, big);
  const double scale = static_cast<double>(n_new) / static_cast<double>(n_old);
  for (std::size_t j = 0; j < n_new; ++j) out(static_cast<Eigen::Index>(j)) = res[j] * scale;
  return out;
}

/// int_{-l}^{l} exp(i k pi x / l) g(x) dx by the equispaced rule on the ring nodes.
inline std::complex<double> ring_mode_integral(const Domain& d, const Vec& g, int k) {
  const double l = d.half_width();
  std::complex<double> acc = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j)
    acc += std::polar(1.0, k * kPi * d.node(j).x / l) * g(static_cast<Eigen::Index>(j));
  return acc * (2.0 * l / static_cast<double>(d.size()));
}

/// Index of the largest |c_k| over 1 <= k <= n/2 of the discrete Fourier transform.
inline int dominant_mode(const Vec& g) {
  Eigen::FFT<double> fft;
  std::vector<double> in(g.data(), g.data() + g.size());
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, in);
  int best = 1;
  for (std::size_t k = 1; k <= spec.size() / 2; ++k)
    if (std::abs(spec[k]) > std::abs(spec[static_cast<std::size_t>(best)])) best = static_cast<int>(k);
  return best;
}

}  // namespace nfield
