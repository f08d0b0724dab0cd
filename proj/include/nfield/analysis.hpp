#pragma once

// Convergence studies (weak Fourier-mode errors and their rates), pointwise dispersion,
// quenched-versus-averaged gaps, and the discretised action functional.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "nfield/core.hpp"
#include "nfield/coupling.hpp"
#include "nfield/geometry.hpp"
#include "nfield/graph.hpp"
#include "nfield/meanfield.hpp"
#include "nfield/model.hpp"
#include "nfield/ode.hpp"
#include "nfield/particle.hpp"

namespace nfield {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // confidence half-width of the slope
};

/// Least squares y = a + b x with a Student-t confidence half-width for b.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y, double confidence = 0.95) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      sse += r * r;
    }
    const double se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    boost::math::students_t dist(static_cast<double>(n - 2));
    f.half_width = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0)) * se;
  }
  return f;
}

inline LinearFit fit_loglog(const std::vector<double>& n, const std::vector<double>& err) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < n.size(); ++i) {
    lx.push_back(std::log(n[i]));
    ly.push_back(std::log(std::max(err[i], 1e-300)));
  }
  return fit_line(lx, ly);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------
// Weak convergence

/// Mean-field reference at time T on a fixed ring grid, in mode space.
struct MeanFieldReference {
  std::shared_ptr<Domain> domain;
  MeanFieldState state;
  // int_{-l}^{l} phi_k m_a dx and int phi_k (V + m m^T)_{ab} dx.
  std::vector<std::complex<double>> m_modes;  // (k_max+1) x q
  std::vector<std::complex<double>> s_modes;  // (k_max+1) x q x q
  int k_max = 0;
  int q = 1;
};

inline MeanFieldReference meanfield_reference(const ModelSpec& model, double l, std::size_t n_ref, double T, int k_max,
                                              const OdeSolver& solver = OdeSolver::rk45(1e-8, 1e-10)) {
  MeanFieldReference ref;
  ref.domain = std::make_shared<Domain>(build_ring(l, n_ref));
  ref.state = mf_integrate(model, *ref.domain, T, solver).back();
  ref.k_max = k_max;
  ref.q = model.q;
  const int q = model.q;
  const auto n = static_cast<Eigen::Index>(n_ref);
  for (int k = 0; k <= k_max; ++k) {
    for (int a = 0; a < q; ++a) {
      Vec g(n);
      for (Eigen::Index j = 0; j < n; ++j) g(j) = ref.state.m(j * q + a);
      ref.m_modes.push_back(ring_mode_integral(*ref.domain, g, k));
    }
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        Vec g(n);
        for (Eigen::Index j = 0; j < n; ++j)
          g(j) = ref.state.cov(static_cast<std::size_t>(j))(a, b) + ref.state.m(j * q + a) * ref.state.m(j * q + b);
        ref.s_modes.push_back(ring_mode_integral(*ref.domain, g, k));
      }
  }
  return ref;
}

struct ModeErrors {
  std::vector<double> Em;  // per k
  std::vector<double> EV;
  std::vector<double> E;
};

/// E^m_k = max_a |(1/n) sum_j phi_k u_a - (1/2l) int phi_k m_a dx| (empirical measure against the
/// uniform probability measure), E^V_k likewise for second moments, and
/// E_k = |(2l/n) sum_j phi_k u_1 - int phi_k m_1 dx| (absolute value of complex numbers).
inline ModeErrors mode_errors(const Vec& u, const Domain& d, const MeanFieldReference& ref) {
  const int q = ref.q;
  const double l = d.half_width();
  const ModeMoments mm = snapshot_moments(u, d, q, ref.k_max);
  ModeErrors out;
  for (int k = 0; k <= ref.k_max; ++k) {
    double em = 0.0, ev = 0.0;
    for (int a = 0; a < q; ++a) {
      em = std::max(em, std::abs(mm.m(k, a) - ref.m_modes[static_cast<std::size_t>(k * q + a)] / (2.0 * l)));
      for (int b = 0; b < q; ++b)
        ev = std::max(ev, std::abs(mm.s(k, a, b) - ref.s_modes[static_cast<std::size_t>((k * q + a) * q + b)] / (2.0 * l)));
    }
    out.Em.push_back(em);
    out.EV.push_back(ev);
    out.E.push_back(std::abs(2.0 * l * mm.m(k, 0) - ref.m_modes[static_cast<std::size_t>(k * q)]));
  }
  return out;
}

/// sup_j |u^j_T - m(x_j, T)| over the first component.
inline double pointwise_dispersion(const Vec& u, const Domain& d, const MeanFieldReference& ref) {
  const int q = ref.q;
  const auto nref = static_cast<Eigen::Index>(ref.domain->size());
  Vec m1(nref);
  for (Eigen::Index j = 0; j < nref; ++j) m1(j) = ref.state.m(j * q);
  const Vec mj = ring_resample(m1, d.size());
  double best = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j)
    best = std::max(best, std::abs(u(static_cast<Eigen::Index>(j) * q) - mj(static_cast<Eigen::Index>(j))));
  return best;
}

struct ConvergenceReport {
  std::vector<std::size_t> n_list;
  std::vector<std::uint64_t> seeds;
  int k_max = 0;
  // [n index][seed index][k]
  std::vector<std::vector<ModeErrors>> errors;
  std::vector<std::vector<double>> pointwise;  // [n index][seed index]
  std::vector<LinearFit> fit_E;                // per k, seed-median E vs n
  std::vector<LinearFit> fit_Em;
  std::vector<LinearFit> fit_EV;
  int failures = 0;

  double median_E(std::size_t ni, int k) const {
    std::vector<double> v;
    for (const auto& e : errors[ni])
      if (!e.E.empty()) v.push_back(e.E[static_cast<std::size_t>(k)]);
    return median(v);
  }
  double median_Em(std::size_t ni, int k) const {
    std::vector<double> v;
    for (const auto& e : errors[ni])
      if (!e.Em.empty()) v.push_back(e.Em[static_cast<std::size_t>(k)]);
    return median(v);
  }
  double median_EV(std::size_t ni, int k) const {
    std::vector<double> v;
    for (const auto& e : errors[ni])
      if (!e.EV.empty()) v.push_back(e.EV[static_cast<std::size_t>(k)]);
    return median(v);
  }
};

struct ConvergenceOptions {
  double dt = 0.01;
  std::size_t n_ref = 2048;
  bool deterministic_init = false;
  /// Called after each (n, seed) cell; for progress reporting.
  std::function<void(std::size_t, std::uint64_t)> progress;
};

/// Particle runs with averaged connectivity on rings of the given sizes; errors at time T
/// against one mean-field reference; seed-median log-log fits per mode.
inline ConvergenceReport convergence_study(const ModelSpec& model, double l, const std::vector<std::size_t>& n_list,
                                           const std::vector<std::uint64_t>& seeds, double T, int k_max,
                                           const ConvergenceOptions& opt = {}) {
  if (n_list.size() < 4) throw ConfigError("convergence study needs at least 4 values of n");
  ConvergenceReport rep;
  rep.n_list = n_list;
  rep.seeds = seeds;
  rep.k_max = k_max;
  const MeanFieldReference ref = meanfield_reference(model, l, opt.n_ref, T, k_max);
  rep.errors.resize(n_list.size());
  rep.pointwise.resize(n_list.size());
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    const Domain d = build_ring(l, n_list[ni]);
    const Connectivity conn = Connectivity::averaged(d, model.kernel);
    for (std::uint64_t seed : seeds) {
      try {
        SimulateOptions so;
        so.deterministic_init = opt.deterministic_init;
        const SdePath p = simulate(model, d, conn, T, opt.dt, seed, {T}, so);
        rep.errors[ni].push_back(mode_errors(p.snapshots.back(), d, ref));
        rep.pointwise[ni].push_back(pointwise_dispersion(p.snapshots.back(), d, ref));
      } catch (const NumericalError&) {
        ++rep.failures;
        rep.errors[ni].push_back({});
      }
      if (opt.progress) opt.progress(n_list[ni], seed);
    }
  }
  std::vector<double> nn(n_list.begin(), n_list.end());
  for (int k = 0; k <= k_max; ++k) {
    std::vector<double> e, em, ev;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
      e.push_back(rep.median_E(ni, k));
      em.push_back(rep.median_Em(ni, k));
      ev.push_back(rep.median_EV(ni, k));
    }
    rep.fit_E.push_back(fit_loglog(nn, e));
    rep.fit_Em.push_back(fit_loglog(nn, em));
    rep.fit_EV.push_back(fit_loglog(nn, ev));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Quenched versus averaged

struct GapTable {
  std::vector<std::size_t> n_list;
  std::vector<std::vector<double>> gaps;  // [n index][seed index]
  std::vector<double> median_gap;
  LinearFit fit;
};

/// mean_j |u^j_T - v^j_T| for the sampled-graph system u and the averaged system v driven by the
/// same Brownian increments and initial data.
inline double quenched_gap(const ModelSpec& model, const Domain& d, double phi, std::uint64_t seed, double T, double dt,
                           std::uint64_t graph_seed) {
  const Connectivity q = Connectivity::sampled(sample_graph(d, model.kernel, phi, graph_seed));
  const Connectivity a = Connectivity::averaged(d, model.kernel);
  const SdePath pu = simulate(model, d, q, T, dt, seed, {T});
  const SdePath pv = simulate(model, d, a, T, dt, seed, {T});
  return (pu.snapshots.back() - pv.snapshots.back()).cwiseAbs().mean();
}

inline GapTable quenched_vs_averaged(const ModelSpec& model, double l, double phi, const std::vector<std::size_t>& n_list,
                                     const std::vector<std::uint64_t>& seeds, double T, double dt = 0.01) {
  GapTable tab;
  tab.n_list = n_list;
  for (std::size_t n : n_list) {
    const Domain d = build_ring(l, n);
    std::vector<double> g;
    for (std::uint64_t s : seeds) g.push_back(quenched_gap(model, d, phi, s, T, dt, s ^ 0x9E3779B97F4A7C15ull));
    tab.median_gap.push_back(median(g));
    tab.gaps.push_back(std::move(g));
  }
  tab.fit = fit_loglog(std::vector<double>(n_list.begin(), n_list.end()), tab.median_gap);
  return tab;
}

/// Gronwall-type sup-norm ceiling for the gap at time T: both drifts differ by at most
/// M_f (row bound of (1/(n phi))|K| + row bound of the averaged kernel), damped by -L.
inline double quenched_gap_ceiling(const ModelSpec& model, const SampledGraph& g, const AveragedCoupling& avg, double T) {
  if (model.q != 1) throw ConfigError("gap ceiling implemented for q = 1");
  std::uint64_t best = 0;
  for (std::size_t r = 0; r < g.rows(); ++r) best = std::max(best, g.rowptr[r + 1] - g.rowptr[r]);
  const double row_sampled = static_cast<double>(best) / (static_cast<double>(g.n) * g.phi);
  const double row_avg = avg.max_row_abs_sum(0, 0);
  const double lam = model.L(0, 0);
  const double Mf = model.firing[0].bound();
  return (1.0 - std::exp(-lam * T)) / lam * (row_sampled + row_avg) * Mf;
}

// ---------------------------------------------------------------------------
// Action functional

struct ControlledPath {
  std::vector<double> times;  // uniform grid
  std::vector<Vec> u;         // n q per time, node-major
};

struct ActionResult {
  double J = 0.0;
  double discretization_estimate = 0.0;
  std::size_t time_points = 0;
};

struct ActionOptions {
  /// Covariance used in F; defaults to the Lyapunov equilibrium of (L, G G^T) at t = 0.
  std::function<Mat(double, std::size_t)> covariance;
};

namespace detail {

inline double action_on_grid(const ControlledPath& path, const ModelSpec& model, const Domain& d,
                             const AveragedCoupling& op, const std::function<Mat(double, std::size_t)>& cov,
                             std::size_t stride) {
  const int q = model.q;
  const std::size_t n = d.size();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < path.times.size(); i += stride) idx.push_back(i);
  const std::size_t M = idx.size();
  if (M < 3) throw ConfigError("action functional needs at least 3 time points");
  const double h = path.times[idx[1]] - path.times[idx[0]];
  const auto nq = static_cast<Eigen::Index>(n) * q;
  std::vector<double> integrand(M, 0.0);
  Vec r(nq), g(nq);
  for (std::size_t p = 0; p < M; ++p) {
    const double t = path.times[idx[p]];
    const Vec& u = path.u[idx[p]];
    Vec du;
    if (p == 0) du = (-3.0 * u + 4.0 * path.u[idx[1]] - path.u[idx[2]]) / (2.0 * h);
    else if (p + 1 == M) du = (3.0 * u - 4.0 * path.u[idx[M - 2]] + path.u[idx[M - 3]]) / (2.0 * h);
    else du = (path.u[idx[p + 1]] - path.u[idx[p - 1]]) / (2.0 * h);
    for (std::size_t j = 0; j < n; ++j) {
      const Mat V = cov(t, j);
      for (int a = 0; a < q; ++a) {
        const auto i = static_cast<Eigen::Index>(j) * q + a;
        r(i) = firing_moment(u(i), V(a, a), model.firing[static_cast<std::size_t>(a)]);
      }
    }
    if (model.kernel.all_zero()) g.setZero();
    else op.apply(r, g);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const Point& x = d.node(j);
      const auto s = static_cast<Eigen::Index>(j) * q;
      const Vec b = du.segment(s, q) + model.L * u.segment(s, q) - g.segment(s, q) - model.input(t, x);
      const Mat G = model.noise(t, x);
      acc += G.partialPivLu().solve(b).squaredNorm();
    }
    integrand[p] = acc / static_cast<double>(n);
  }
  double J = 0.0;
  for (std::size_t p = 0; p + 1 < M; ++p) J += 0.5 * h * (integrand[p] + integrand[p + 1]);
  return 0.5 * J;
}

}  // namespace detail

/// J = (1/2) int_0^T (1/n) sum_j |G^{-1}(du_j/dt + L u_j - g_j - I)|^2 dt with
/// g_j = sum_k (|D|/n) K(x_j, x_k) F(u_k, V_k). Centred differences in time, trapezoid rule; the
/// discretisation estimate is |J_h - J_{2h}| / 3.
inline ActionResult action_functional(const ControlledPath& path, const ModelSpec& model, const Domain& d,
                                      const ActionOptions& opt = {}) {
  validate_model(model);
  if (path.times.size() != path.u.size()) throw ConfigError("path times and states differ in length");
  for (std::size_t i = 2; i < path.times.size(); ++i)
    if (std::abs((path.times[i] - path.times[i - 1]) - (path.times[1] - path.times[0])) >
        1e-9 * std::max(1.0, path.times.back()))
      throw ConfigError("path times must be uniform");
  const double T = path.times.empty() ? 0.0 : path.times.back();
  if (min_abs_det_noise(model, d, T) < 1e-12) throw ConfigError("model.noise: G must be nonsingular for the action functional");
  std::function<Mat(double, std::size_t)> cov = opt.covariance;
  if (!cov) {
    const Mat G0 = model.noise(0.0, d.node(0));
    const Mat Vs = lyapunov_equilibrium(model.L, G0 * G0.transpose());
    cov = [Vs](double, std::size_t) { return Vs; };
  }
  const AveragedCoupling op(d, model.kernel);
  ActionResult res;
  res.time_points = path.times.size();
  res.J = detail::action_on_grid(path, model, d, op, cov, 1);
  if ((path.times.size() - 1) % 2 == 0 && path.times.size() >= 5) {
    const double J2 = detail::action_on_grid(path, model, d, op, cov, 2);
    res.discretization_estimate = std::abs(res.J - J2) / 3.0;
  }
  return res;
}

/// Mean-field trajectory on a uniform grid as a controlled path (first moments only).
inline ControlledPath meanfield_path(const ModelSpec& model, const Domain& d, double T, std::size_t steps,
                                     const OdeSolver& solver = OdeSolver::rk45(1e-11, 1e-13)) {
  std::vector<double> ts;
  for (std::size_t i = 0; i <= steps; ++i) ts.push_back(T * static_cast<double>(i) / static_cast<double>(steps));
  ts[0] = 0.0;
  const auto states = mf_integrate(model, d, T, solver, std::vector<double>(ts.begin() + 1, ts.end()));
  ControlledPath p;
  p.times = ts;
  p.u.push_back(meanfield_initial(model, d).m);
  for (const auto& s : states) p.u.push_back(s.m);
  return p;
}

}  // namespace nfield
