#pragma once

// Euler-Maruyama integration of the n q dimensional particle system
//   du^j = (-L u^j + coupling_j(f(u)) + I(t, x_j)) dt + G(t, x_j) dW^j.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nfield/core.hpp"
#include "nfield/geometry.hpp"
#include "nfield/graph.hpp"
#include "nfield/model.hpp"
#include "nfield/rng.hpp"

namespace nfield {

struct ParticleState {
  double t = 0.0;
  Vec u;  // node-major, component-minor
};

struct SdePath {
  std::vector<double> times;
  std::vector<Vec> snapshots;
  std::uint64_t rng_seed = 0;
  double dt = 0.01;
};

/// Standard normals for step `step`, counter (seed, j, step, alpha/2).
inline void brownian_draw(const CounterRng& rng, std::uint64_t step, std::size_t n, int q, Eigen::Ref<Vec> xi) {
  const std::size_t pairs = (static_cast<std::size_t>(q) + 1) / 2;
#pragma omp parallel for schedule(static)
  for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(n); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto z = rng.normals(CounterRng::make(StreamTag::Brownian, static_cast<std::uint32_t>(j), step,
                                                  static_cast<std::uint32_t>(p)));
      const std::size_t a = 2 * p;
      xi(static_cast<Eigen::Index>(j * q + a)) = z[0];
      if (a + 1 < static_cast<std::size_t>(q)) xi(static_cast<Eigen::Index>(j * q + a + 1)) = z[1];
    }
  }
}

/// Initial state: u_0^j ~ N(m0(x_j), V0(x_j)) from the Initial stream, or exactly m0(x_j).
inline Vec initial_state(const ModelSpec& model, const Domain& d, std::uint64_t seed, bool deterministic = false) {
  const int q = model.q;
  const std::size_t n = d.size();
  Vec u(static_cast<Eigen::Index>(n) * q);
  const CounterRng rng(seed);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec m = model.init.mean(d.node(j));
    Vec x = m;
    if (!deterministic && model.init.gaussian) {
      const Mat V = model.init.cov(d.node(j));
      if (V.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(V);
        const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        Vec z(q);
        for (int p = 0; 2 * p < q; ++p) {
          const auto w = rng.normals(CounterRng::make(StreamTag::Initial, static_cast<std::uint32_t>(j), 0,
                                                      static_cast<std::uint32_t>(p)));
          z(2 * p) = w[0];
          if (2 * p + 1 < q) z(2 * p + 1) = w[1];
        }
        x += es.eigenvectors() * ev.asDiagonal() * z;
      }
    }
    u.segment(static_cast<Eigen::Index>(j) * q, q) = x;
  }
  return u;
}

namespace detail {

inline void check_finite(const Vec& u, double t) {
  if (u.allFinite()) return;
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = std::isfinite(u(i)) ? std::abs(u(i)) : std::numeric_limits<double>::infinity();
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  throw IntegrationError("particle state became non-finite", t, static_cast<std::size_t>(arg));
}

// u <- u + dt(-L u + c + I) + sqrt(dt) G xi, with c the coupling already evaluated.
inline void em_update(Vec& u, const Vec& coupling, const Vec& xi, double t, double dt, const ModelSpec& model,
                      const Domain& d) {
  const int q = model.q;
  const auto n = static_cast<Eigen::Index>(d.size());
  const double sdt = std::sqrt(dt);
  if (q == 1 && model.input.is_constant() && model.noise.is_constant()) {
    const double L = model.L(0, 0);
    const double I = model.input.constant(0);
    const double G = model.noise.constant(0, 0);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < n; ++j) u(j) += dt * (-L * u(j) + coupling(j) + I) + sdt * G * xi(j);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    const Point& x = d.node(static_cast<std::size_t>(j));
    auto uj = u.segment(j * q, q);
    const Vec I = model.input(t, x);
    const Mat G = model.noise(t, x);
    const Vec drift = -model.L * uj + coupling.segment(j * q, q) + I;
    uj += dt * drift + sdt * G * xi.segment(j * q, q);
  }
}

inline void rates_into(const Vec& u, const ModelSpec& model, Vec& r) {
  const int q = model.q;
  const auto n = u.size() / q;
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j)
    for (int a = 0; a < q; ++a) r(j * q + a) = model.firing[static_cast<std::size_t>(a)](u(j * q + a));
}

}  // namespace detail

/// One Euler-Maruyama step with a caller-supplied standard normal draw.
inline ParticleState em_step(const ParticleState& s, const ModelSpec& model, const Domain& d, const Connectivity& conn,
                             double dt, const Vec& noise_draw) {
  if (!(dt > 0.0)) throw ConfigError("run.dt must be > 0");
  if (s.u.size() != noise_draw.size() || static_cast<std::size_t>(s.u.size()) != conn.rows())
    throw ConfigError("em_step: dimension mismatch");
  Vec r(s.u.size()), c(s.u.size());
  detail::rates_into(s.u, model, r);
  conn.apply(r, c);
  ParticleState out{s.t + dt, s.u};
  detail::em_update(out.u, c, noise_draw, s.t, dt, model, d);
  detail::check_finite(out.u, out.t);
  return out;
}

struct SimulateOptions {
  bool deterministic_init = false;
  /// Use this initial state instead of drawing one.
  const Vec* initial = nullptr;
};

/// Integrates on the grid t_i = i dt up to T, saving at the requested times (each rounded to
/// the nearest step). Fully determined by seed.
inline SdePath simulate(const ModelSpec& model, const Domain& d, const Connectivity& conn, double T, double dt,
                        std::uint64_t seed, const std::vector<double>& save_times, const SimulateOptions& opt = {}) {
  if (!(T > 0.0)) throw ConfigError("run.T must be > 0");
  if (!(dt > 0.0)) throw ConfigError("run.dt must be > 0");
  const auto steps = static_cast<std::uint64_t>(std::llround(T / dt));
  std::vector<std::uint64_t> save_steps;
  for (double ts : save_times) {
    if (ts < -1e-12 || ts > T + 1e-9) throw ConfigError("run.save_times must lie in [0, T]");
    const auto k = static_cast<std::uint64_t>(std::llround(ts / dt));
    if (std::abs(static_cast<double>(k) * dt - ts) > 1e-6 * std::max(1.0, ts))
      throw ConfigError("run.save_times must lie on the dt grid");
    if (!save_steps.empty() && k <= save_steps.back()) throw ConfigError("run.save_times must be increasing");
    save_steps.push_back(k);
  }
  SdePath path;
  path.rng_seed = seed;
  path.dt = dt;
  Vec u = opt.initial ? *opt.initial : initial_state(model, d, seed, opt.deterministic_init);
  if (static_cast<std::size_t>(u.size()) != conn.rows()) throw ConfigError("simulate: connectivity size mismatch");
  const CounterRng rng(seed);
  const bool noisy = !(model.noise.is_constant() && model.noise.constant.cwiseAbs().maxCoeff() == 0.0);
  const bool coupled = !model.kernel.all_zero();
  Vec r(u.size()), c = Vec::Zero(u.size()), xi = Vec::Zero(u.size());
  std::size_t next = 0;
  auto maybe_save = [&](std::uint64_t step) {
    while (next < save_steps.size() && save_steps[next] == step) {
      path.times.push_back(static_cast<double>(step) * dt);
      path.snapshots.push_back(u);
      ++next;
    }
  };
  maybe_save(0);
  for (std::uint64_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    if (coupled) {
      detail::rates_into(u, model, r);
      conn.apply(r, c);
    }
    if (noisy) brownian_draw(rng, step, d.size(), model.q, xi);
    detail::em_update(u, c, xi, t, dt, model, d);
    if ((step & 63u) == 63u || step + 1 == steps) detail::check_finite(u, t + dt);
    maybe_save(step + 1);
  }
  return path;
}

/// Fourier-mode moments of a snapshot on the ring: first(k, alpha) = (1/n) sum_j phi_k(x_j) u^j_alpha
/// and second(k, alpha, beta) = (1/n) sum_j phi_k(x_j) u^j_alpha u^j_beta, phi_k(x) = exp(i k pi x / l).
struct ModeMoments {
  int k_max = 0;
  int q = 1;
  std::vector<std::complex<double>> first;   // (k_max+1) x q
  std::vector<std::complex<double>> second;  // (k_max+1) x q x q

  std::complex<double> m(int k, int a) const { return first[static_cast<std::size_t>(k * q + a)]; }
  std::complex<double> s(int k, int a, int b) const { return second[static_cast<std::size_t>((k * q + a) * q + b)]; }
};

inline ModeMoments snapshot_moments(const Vec& u, const Domain& d, int q, int k_max) {
  if (d.kind() != DomainKind::Ring) throw ConfigError("Fourier moments need a ring domain");
  const std::size_t n = d.size();
  const double l = d.half_width();
  ModeMoments mm;
  mm.k_max = k_max;
  mm.q = q;
  mm.first.assign(static_cast<std::size_t>((k_max + 1) * q), 0.0);
  mm.second.assign(static_cast<std::size_t>((k_max + 1) * q * q), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = d.node(j).x;
    const auto uj = u.segment(static_cast<Eigen::Index>(j) * q, q);
    for (int k = 0; k <= k_max; ++k) {
      const std::complex<double> ph = std::polar(1.0, k * kPi * x / l);
      for (int a = 0; a < q; ++a) {
        mm.first[static_cast<std::size_t>(k * q + a)] += ph * uj(a);
        for (int b = 0; b < q; ++b) mm.second[static_cast<std::size_t>((k * q + a) * q + b)] += ph * (uj(a) * uj(b));
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& z : mm.first) z *= inv;
  for (auto& z : mm.second) z *= inv;
  return mm;
}

inline std::vector<ModeMoments> empirical_moments(const SdePath& path, const Domain& d, int q, int k_max) {
  std::vector<ModeMoments> out;
  out.reserve(path.snapshots.size());
  for (const auto& u : path.snapshots) out.push_back(snapshot_moments(u, d, q, k_max));
  return out;
}

}  // namespace nfield
