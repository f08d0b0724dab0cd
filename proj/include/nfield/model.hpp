#pragma once

// Functional ingredients of the particle model: local matrix L, firing rates and their
// Gaussian moments, connectivity kernels, input, noise intensity and initial law.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "nfield/core.hpp"
#include "nfield/geometry.hpp"
#include "nfield/quadrature.hpp"

namespace nfield {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

// ---------------------------------------------------------------------------
// Firing rates

struct FiringRate {
  enum class Kind { ErfSigmoid, Zero, Constant, Custom };

  Kind kind = Kind::Zero;
  double gain = 1.0;       // alpha
  double threshold = 0.0;  // theta
  double scale = 1.0;      // amplitude multiplying Phi
  double value = 0.0;      // Constant
  std::function<double(double)> custom;
  double custom_bound = 0.0;

  static FiringRate erf_sigmoid(double gain, double threshold, double scale = 1.0) {
    if (!(gain > 0.0)) throw ConfigError("firing.gain must be > 0");
    FiringRate f;
    f.kind = Kind::ErfSigmoid;
    f.gain = gain;
    f.threshold = threshold;
    f.scale = scale;
    return f;
  }
  static FiringRate zero() { return FiringRate{}; }
  static FiringRate constant(double c) {
    FiringRate f;
    f.kind = Kind::Constant;
    f.value = c;
    return f;
  }
  static FiringRate from_function(std::function<double(double)> fn, double bound) {
    FiringRate f;
    f.kind = Kind::Custom;
    f.custom = std::move(fn);
    f.custom_bound = bound;
    return f;
  }

  double operator()(double u) const {
    switch (kind) {
      case Kind::ErfSigmoid: return scale * normal_cdf(gain * (u - threshold));
      case Kind::Zero: return 0.0;
      case Kind::Constant: return value;
      case Kind::Custom: return custom(u);
    }
    return 0.0;
  }

  /// M_f = sup |f|.
  double bound() const {
    switch (kind) {
      case Kind::ErfSigmoid: return std::abs(scale);
      case Kind::Zero: return 0.0;
      case Kind::Constant: return std::abs(value);
      case Kind::Custom: return custom_bound;
    }
    return 0.0;
  }

  double lipschitz() const {
    return kind == Kind::ErfSigmoid ? std::abs(scale) * gain / std::sqrt(2.0 * kPi) : 0.0;
  }

  bool has_closed_form() const { return kind != Kind::Custom; }
};

/// E[f(X)], X ~ N(m, v), by Gauss-Hermite with the given number of nodes.
inline double firing_moment_quadrature(double m, double v, const FiringRate& fr, std::size_t nodes = 64) {
  if (nodes < 8) throw ConfigError("Gauss-Hermite rule needs at least 8 nodes");
  if (v < 0.0) throw DomainError("variance must be >= 0");
  const auto& rule = gauss_hermite(nodes);
  const double s = std::sqrt(2.0 * v);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * fr(m + s * rule.nodes[i]);
  return acc / std::sqrt(kPi);
}

/// F(m, v) = E[f(X)], X ~ N(m, v). Closed form Phi(alpha(m - theta)/sqrt(1 + alpha^2 v))
/// for the erf sigmoid; quadrature otherwise.
inline double firing_moment(double m, double v, const FiringRate& fr) {
  if (v < 0.0) throw DomainError("variance must be >= 0");
  switch (fr.kind) {
    case FiringRate::Kind::ErfSigmoid:
      return fr.scale * normal_cdf(fr.gain * (m - fr.threshold) / std::sqrt(1.0 + fr.gain * fr.gain * v));
    case FiringRate::Kind::Zero: return 0.0;
    case FiringRate::Kind::Constant: return fr.value;
    case FiringRate::Kind::Custom: return firing_moment_quadrature(m, v, fr, 64);
  }
  return 0.0;
}

/// dF/dm.
inline double firing_moment_dm(double m, double v, const FiringRate& fr) {
  if (v < 0.0) throw DomainError("variance must be >= 0");
  switch (fr.kind) {
    case FiringRate::Kind::ErfSigmoid: {
      const double s = std::sqrt(1.0 + fr.gain * fr.gain * v);
      return fr.scale * fr.gain / s * normal_pdf(fr.gain * (m - fr.threshold) / s);
    }
    case FiringRate::Kind::Zero:
    case FiringRate::Kind::Constant: return 0.0;
    case FiringRate::Kind::Custom: {
      if (v == 0.0) {
        const double h = 1e-6;
        return (fr(m + h) - fr(m - h)) / (2.0 * h);
      }
      // Stein: d/dm E f(X) = E[f(X)(X - m)] / v.
      const auto& rule = gauss_hermite(64);
      const double s = std::sqrt(2.0 * v);
      double acc = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * fr(m + s * rule.nodes[i]) * s * rule.nodes[i];
      return acc / (std::sqrt(kPi) * v);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Kernels

struct BesselProfile {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

inline double bessel_integrand(double r, double s) {
  const double s2 = s * s;
  return std::cyl_bessel_j(0.0, r * s) * s / (s2 * s2 + s2 + 1.0);
}

// int_S^inf s/(s^4+s^2+1) ds, exact.
inline double bessel_tail_at_zero(double S) {
  return (kPi / 2.0 - std::atan((2.0 * S * S + 1.0) / std::sqrt(3.0))) / std::sqrt(3.0);
}

// McMahon expansion of the m-th positive zero of J0 (m >= 1).
inline double j0_zero(int m) {
  const double b = (static_cast<double>(m) - 0.25) * kPi;
  const double ib = 1.0 / (8.0 * b);
  return b + ib - 124.0 / 3.0 * ib * ib * ib;
}

}  // namespace detail

/// a(r) = int_0^inf J0(r s) s / (s^4 + s^2 + 1) ds by panel-wise Gauss-Kronrod. Panels end at
/// the zeros of J0(r s); partial sums past s_max are Wynn-extrapolated.
inline BesselProfile bessel_lateral_profile(double r, double s_max = 200.0) {
  if (r < 0.0) throw DomainError("distance must be >= 0");
  BesselProfile out;
  std::vector<double> breaks{0.0};
  for (double b = 1.0; b < s_max; b *= 2.0) breaks.push_back(b);
  if (r == 0.0) {
    breaks.push_back(s_max);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      const auto q = integrate_gk([](double s) { return detail::bessel_integrand(0.0, s); }, breaks[i], breaks[i + 1]);
      out.value += q.value;
      out.error += q.error;
    }
    out.value += detail::bessel_tail_at_zero(s_max);
    return out;
  }
  // Zeros of J0(r s) up to s_max, plus a few beyond it for extrapolation.
  std::vector<double> zeros;
  int past = 0;
  constexpr double kHardLimit = 1e6;
  for (int m = 1; past < 12; ++m) {
    const double z = detail::j0_zero(m) / r;
    if (z > kHardLimit) break;
    zeros.push_back(z);
    if (z > s_max) ++past;
  }
  std::vector<double> pts = breaks;
  for (double z : zeros) pts.push_back(z);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  auto f = [r](double s) { return detail::bessel_integrand(r, s); };
  double sum = 0.0;
  double err = 0.0;
  std::vector<double> partial;
  const double first_far_zero = zeros.empty() ? kHardLimit : zeros.front();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto q = integrate_gk(f, pts[i], pts[i + 1], 1e-12, 12, 1e-13);
    sum += q.value;
    err += q.error;
    if (pts[i + 1] >= s_max && pts[i + 1] >= first_far_zero) partial.push_back(sum);
  }
  if (pts.back() >= kHardLimit || zeros.size() < 2) {
    // Argument too small to oscillate before the hard limit: J0(r s) ~ 1 on the tail.
    out.value = sum + std::cyl_bessel_j(0.0, r * pts.back()) * detail::bessel_tail_at_zero(pts.back());
    out.error = err + 1e-12;
    return out;
  }
  const auto [limit, delta] = wynn_epsilon(partial);
  out.value = limit;
  out.error = err + delta;
  return out;
}

/// Cached a(r); safe to call concurrently. Throws if the error estimate exceeds 1e-8.
inline double bessel_lateral_cached(double r, double s_max = 200.0) {
  static std::mutex mutex;
  static std::unordered_map<std::uint64_t, double> cache;
  std::uint64_t key;
  std::memcpy(&key, &r, sizeof key);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end() && s_max == 200.0) return it->second;
  }
  const auto p = bessel_lateral_profile(r, s_max);
  if (!(p.error <= 1e-8))
    throw NumericalError("Bessel kernel quadrature did not converge at r=" + std::to_string(r) +
                         " (error estimate " + std::to_string(p.error) + ")");
  if (s_max == 200.0) {
    std::lock_guard<std::mutex> lock(mutex);
    cache.emplace(key, p.value);
  }
  return p.value;
}

/// Distance-dependent kernel profile A(r) with sign split A = A+ - A-.
struct Kernel {
  enum class Kind { Zero, Constant, GaussianDiff, OscillatoryDecay, BesselLateral, Tabulated };

  Kind kind = Kind::Zero;
  double B = 1.0;
  double C = 1.0;
  double nu = 1.0;       // BesselLateral multiplier
  double cutoff = 1e-3;  // BesselLateral: A = 0 where |a| <= cutoff
  double s_max = 200.0;
  double value = 0.0;  // Constant
  double dr = 0.0;     // Tabulated grid step, r_i = i dr
  std::vector<double> plus, minus;

  static Kernel zero() { return Kernel{}; }
  static Kernel constant(double c) {
    Kernel k;
    k.kind = Kind::Constant;
    k.value = c;
    return k;
  }
  /// A(x) = C/sqrt(pi) exp(-x^2) - C/(B sqrt(pi)) exp(-(x/B)^2).
  static Kernel gaussian_diff(double B, double C) {
    if (!(B > 0.0)) throw ConfigError("model.kernel.B must be > 0");
    Kernel k;
    k.kind = Kind::GaussianDiff;
    k.B = B;
    k.C = C;
    return k;
  }
  /// A(x) = C exp(-B|x|)(B sin|x| + cos x).
  static Kernel oscillatory_decay(double B, double C) {
    if (!(B > 0.0)) throw ConfigError("model.kernel.B must be > 0");
    Kernel k;
    k.kind = Kind::OscillatoryDecay;
    k.B = B;
    k.C = C;
    return k;
  }
  /// nu * a(x) with a(x) = int_0^inf J0(xs) s/(s^4+s^2+1) ds, zeroed where |a| <= cutoff.
  static Kernel bessel_lateral(double nu, double cutoff = 1e-3) {
    Kernel k;
    k.kind = Kind::BesselLateral;
    k.nu = nu;
    k.cutoff = cutoff;
    return k;
  }
  static Kernel tabulated(double dr, std::vector<double> plus, std::vector<double> minus) {
    if (!(dr > 0.0)) throw ConfigError("tabulated kernel needs dr > 0");
    if (plus.size() != minus.size() || plus.empty()) throw ConfigError("tabulated kernel needs equal, non-empty tables");
    for (std::size_t i = 0; i < plus.size(); ++i)
      if (plus[i] < 0.0 || minus[i] < 0.0) throw ConfigError("tabulated p+ and p- must be >= 0");
    Kernel k;
    k.kind = Kind::Tabulated;
    k.dr = dr;
    k.plus = std::move(plus);
    k.minus = std::move(minus);
    return k;
  }

  bool is_zero() const { return kind == Kind::Zero || (kind == Kind::Constant && value == 0.0); }

  double eval(double r) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::Constant: return value;
      case Kind::GaussianDiff: {
        const double sp = std::sqrt(kPi);
        return C / sp * std::exp(-r * r) - C / (B * sp) * std::exp(-(r / B) * (r / B));
      }
      case Kind::OscillatoryDecay: {
        const double a = std::abs(r);
        return C * std::exp(-B * a) * (B * std::sin(a) + std::cos(r));
      }
      case Kind::BesselLateral: {
        const double a = bessel_lateral_cached(std::abs(r), s_max);
        return std::abs(a) > cutoff ? nu * a : 0.0;
      }
      case Kind::Tabulated: {
        const auto [p, m] = split(r);
        return p - m;
      }
    }
    return 0.0;
  }

  /// (A+, A-) with A+ - A- = A and A+ A- = 0.
  std::pair<double, double> split(double r) const {
    if (kind == Kind::Tabulated) {
      const double x = std::abs(r) / dr;
      const auto i = static_cast<std::size_t>(x);
      if (i + 1 >= plus.size()) return i + 1 == plus.size() && x == static_cast<double>(i)
                                            ? std::pair{plus[i], minus[i]}
                                            : std::pair{0.0, 0.0};
      const double t = x - static_cast<double>(i);
      const double p = (1.0 - t) * plus[i] + t * plus[i + 1];
      const double m = (1.0 - t) * minus[i] + t * minus[i + 1];
      const double d = p - m;
      return d >= 0.0 ? std::pair{d, 0.0} : std::pair{0.0, -d};
    }
    const double a = eval(r);
    return a >= 0.0 ? std::pair{a, 0.0} : std::pair{0.0, -a};
  }
};

/// q x q array of kernels; block (alpha, beta) couples presynaptic component beta into alpha.
struct KernelBlocks {
  int q = 1;
  std::vector<Kernel> blocks{Kernel{}};

  KernelBlocks() = default;
  explicit KernelBlocks(int q_) : q(q_), blocks(static_cast<std::size_t>(q_ * q_)) {}
  static KernelBlocks scalar(Kernel k) {
    KernelBlocks kb(1);
    kb.blocks[0] = std::move(k);
    return kb;
  }

  const Kernel& at(int a, int b) const { return blocks[static_cast<std::size_t>(a * q + b)]; }
  Kernel& at(int a, int b) { return blocks[static_cast<std::size_t>(a * q + b)]; }
  bool all_zero() const {
    for (const auto& k : blocks)
      if (!k.is_zero()) return false;
    return true;
  }
};

inline double kernel_eval(const Kernel& k, double r) {
  if (r < 0.0) throw DomainError("distance must be >= 0");
  return k.eval(r);
}
inline std::pair<double, double> kernel_split(const Kernel& k, double r) {
  if (r < 0.0) throw DomainError("distance must be >= 0");
  return k.split(r);
}

/// Quadrature path, valid for every kernel kind.
inline double kernel_ring_integral_quadrature(const Kernel& k, double l) {
  auto f = [&k](double x) { return k.eval(x); };
  double acc = 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil(l)));
  for (int i = 0; i < panels; ++i) {
    const double a = l * i / panels;
    const double b = l * (i + 1) / panels;
    acc += integrate_gk(f, a, b).value;
  }
  return 2.0 * acc;
}

/// int_{-l}^{l} A(x) dx: closed form for GaussianDiff, adaptive quadrature otherwise.
inline double kernel_ring_integral(const Kernel& k, double l) {
  if (!(l > 0.0)) throw ConfigError("ring half width must be > 0");
  switch (k.kind) {
    case Kernel::Kind::Zero: return 0.0;
    case Kernel::Kind::Constant: return 2.0 * l * k.value;
    case Kernel::Kind::GaussianDiff: return k.C * (std::erf(l) - std::erf(l / k.B));
    default: break;
  }
  return kernel_ring_integral_quadrature(k, l);
}

/// A_k = (1/2l) int_{-l}^{l} A(x) exp(-i k pi x / l) dx by direct quadrature (real for even A).
inline double kernel_fourier_coeff(const Kernel& k, double l, int wavenumber) {
  if (!(l > 0.0)) throw ConfigError("ring half width must be > 0");
  const double w = static_cast<double>(wavenumber) * kPi / l;
  auto f = [&k, w](double x) { return k.eval(x) * std::cos(w * x); };
  double acc = 0.0;
  const int panels = std::max(4, static_cast<int>(std::ceil(l)) + 2 * std::abs(wavenumber));
  for (int i = 0; i < panels; ++i) acc += integrate_gk(f, l * i / panels, l * (i + 1) / panels).value;
  return acc / l;
}

/// A_k for k = 0..n-1 from the FFT of kernel samples on the ring grid.
inline std::vector<std::complex<double>> kernel_fourier_coeffs_fft(const Kernel& k, const Domain& ring) {
  if (ring.kind() != DomainKind::Ring) throw ConfigError("Fourier coefficients need a ring domain");
  const std::size_t n = ring.size();
  const double l = ring.half_width();
  std::vector<double> samples(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double off = 2.0 * l * static_cast<double>(j) / static_cast<double>(n);
    samples[j] = k.eval(std::min(off, 2.0 * l - off));
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, samples);
  for (auto& c : spec) c /= static_cast<double>(n);
  return spec;
}

// ---------------------------------------------------------------------------
// Model specification

/// Position- and time-dependent vector field with a constant fast path.
struct VectorField {
  Vec constant;
  std::function<Vec(double, const Point&)> field;

  Vec operator()(double t, const Point& x) const { return field ? field(t, x) : constant; }
  bool is_constant() const { return !field; }
};

struct MatrixField {
  Mat constant;
  std::function<Mat(double, const Point&)> field;

  Mat operator()(double t, const Point& x) const { return field ? field(t, x) : constant; }
  bool is_constant() const { return !field; }
};

struct InitialLaw {
  std::function<Vec(const Point&)> mean;
  std::function<Mat(const Point&)> cov;
  /// Draw u_0^j ~ N(m0, V0); otherwise u_0^j = m0(x_j) exactly.
  bool gaussian = true;
};

struct ModelSpec {
  int q = 1;
  Mat L = Mat::Identity(1, 1);
  std::vector<FiringRate> firing{FiringRate::zero()};
  KernelBlocks kernel;
  VectorField input{Vec::Zero(1), {}};
  MatrixField noise{Mat::Zero(1, 1), {}};
  InitialLaw init{[](const Point&) { return Vec::Zero(1); }, [](const Point&) { return Mat::Zero(1, 1); }, true};

  Vec rates(const Eigen::Ref<const Vec>& u) const {
    Vec out(q);
    for (int a = 0; a < q; ++a) out(a) = firing[static_cast<std::size_t>(a)](u(a));
    return out;
  }
};

/// Structural validation of a model; throws ConfigError naming the offending field.
inline void validate_model(const ModelSpec& m) {
  if (m.q < 1) throw ConfigError("model.q must be >= 1");
  if (m.L.rows() != m.q || m.L.cols() != m.q) throw ConfigError("model.L must be q x q");
  if (static_cast<int>(m.firing.size()) != m.q) throw ConfigError("model.firing must have q entries");
  if (m.kernel.q != m.q || static_cast<int>(m.kernel.blocks.size()) != m.q * m.q)
    throw ConfigError("model.kernel must have q x q blocks");
  if (m.input.is_constant() && m.input.constant.size() != m.q) throw ConfigError("model.input must have q entries");
  if (m.noise.is_constant() && (m.noise.constant.rows() != m.q || m.noise.constant.cols() != m.q))
    throw ConfigError("model.noise must be q x q");
  if (!m.init.mean || !m.init.cov) throw ConfigError("model.init required");
}

/// Checks V0 symmetric positive semidefinite at every node.
inline void validate_initial_covariance(const ModelSpec& m, const Domain& d) {
  for (std::size_t j = 0; j < d.size(); ++j) {
    const Mat V = m.init.cov(d.node(j));
    if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("model.init.V0 must be symmetric (node " + std::to_string(j) + ")");
    Eigen::SelfAdjointEigenSolver<Mat> es(V);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw ConfigError("model.init.V0 must be positive semidefinite (node " + std::to_string(j) + ")");
  }
}

/// inf |det G(t, x)| over nodes and a grid of times in [0, T].
inline double min_abs_det_noise(const ModelSpec& m, const Domain& d, double T, int time_samples = 11) {
  double best = std::numeric_limits<double>::infinity();
  if (m.noise.is_constant()) return std::abs(m.noise.constant.determinant());
  for (int i = 0; i < time_samples; ++i) {
    const double t = T * i / std::max(1, time_samples - 1);
    for (std::size_t j = 0; j < d.size(); ++j) best = std::min(best, std::abs(m.noise(t, d.node(j)).determinant()));
  }
  return best;
}

}  // namespace nfield
