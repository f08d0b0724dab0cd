#pragma once

// Explicit Runge-Kutta integrators for the method-of-lines systems: classical RK4 with a
// fixed step and the Dormand-Prince 5(4) pair with PI step control.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nfield/core.hpp"

namespace nfield {

using OdeRhs = std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct OdeSolver {
  enum class Kind { RK4, RK45 };
  Kind kind = Kind::RK45;
  double dt = 1e-2;  // RK4 step; RK45 initial step
  double rtol = 1e-8;
  double atol = 1e-10;
  double min_step = 1e-12;
  long max_steps = 50'000'000;

  static OdeSolver rk4(double dt) {
    OdeSolver s;
    s.kind = Kind::RK4;
    s.dt = dt;
    return s;
  }
  static OdeSolver rk45(double rtol = 1e-8, double atol = 1e-10) {
    OdeSolver s;
    s.kind = Kind::RK45;
    s.rtol = rtol;
    s.atol = atol;
    s.dt = 1e-3;
    return s;
  }
};

struct OdeResult {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  long steps = 0;
  long rejected = 0;
};

namespace detail {

inline void check_state(const Eigen::VectorXd& y, double t) {
  if (y.allFinite()) return;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!std::isfinite(y(i))) throw IntegrationError("non-finite state", t, static_cast<std::size_t>(i));
}

}  // namespace detail

/// Integrates y' = f(t, y) from t0, recording the state at each of save_times (ascending,
/// >= t0). The last save time is the final time.
inline OdeResult ode_integrate(const OdeRhs& f, double t0, Eigen::VectorXd y, const std::vector<double>& save_times,
                               const OdeSolver& solver) {
  using V = Eigen::VectorXd;
  OdeResult res;
  if (save_times.empty()) return res;
  for (std::size_t i = 0; i < save_times.size(); ++i) {
    if (save_times[i] < t0 || (i > 0 && save_times[i] < save_times[i - 1]))
      throw ConfigError("save times must be ascending and >= t0");
  }
  const Eigen::Index n = y.size();
  double t = t0;
  std::size_t next = 0;
  auto record = [&]() {
    while (next < save_times.size() && std::abs(save_times[next] - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
      res.times.push_back(save_times[next]);
      res.states.push_back(y);
      ++next;
    }
  };
  record();

  if (solver.kind == OdeSolver::Kind::RK4) {
    if (!(solver.dt > 0.0)) throw ConfigError("RK4 step must be > 0");
    V k1(n), k2(n), k3(n), k4(n), tmp(n);
    while (next < save_times.size()) {
      const double target = save_times[next];
      while (t < target - 1e-12 * std::max(1.0, std::abs(target))) {
        const double h = std::min(solver.dt, target - t);
        f(t, y, k1);
        tmp = y + 0.5 * h * k1;
        f(t + 0.5 * h, tmp, k2);
        tmp = y + 0.5 * h * k2;
        f(t + 0.5 * h, tmp, k3);
        tmp = y + h * k3;
        f(t + h, tmp, k4);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = (target - (t + h) <= 1e-12 * std::max(1.0, std::abs(target))) ? target : t + h;
        ++res.steps;
        detail::check_state(y, t);
      }
      t = target;
      record();
    }
    return res;
  }

  // Dormand-Prince 5(4).
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  V k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n), err(n);
  double h = solver.dt > 0.0 ? solver.dt : 1e-3;
  double err_prev = 1e-4;
  f(t, y, k1);
  while (next < save_times.size()) {
    const double target = save_times[next];
    while (t < target) {
      bool last = false;
      if (t + h >= target) {
        h = target - t;
        last = true;
      }
      if (h < solver.min_step * std::max(1.0, std::abs(t)) && !last)
        throw IntegrationError("step size underflow", t, 0);
      tmp = y + h * a21 * k1;
      f(t + c2 * h, tmp, k2);
      tmp = y + h * (a31 * k1 + a32 * k2);
      f(t + c3 * h, tmp, k3);
      tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      f(t + c4 * h, tmp, k4);
      tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      f(t + c5 * h, tmp, k5);
      tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      f(t + h, tmp, k6);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      f(t + h, ynew, k7);
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = solver.atol + solver.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
        const double r = err(i) / sc;
        en += r * r;
      }
      en = std::sqrt(en / static_cast<double>(std::max<Eigen::Index>(n, 1)));
      if (!std::isfinite(en)) {
        h *= 0.2;
        ++res.rejected;
        if (++res.steps > solver.max_steps) throw IntegrationError("too many steps", t, 0);
        continue;
      }
      if (en <= 1.0) {
        t = last ? target : t + h;
        y = ynew;
        k1 = k7;
        ++res.steps;
        detail::check_state(y, t);
        const double fac = 0.9 * std::pow(en == 0.0 ? 1e-10 : en, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
        err_prev = std::max(en, 1e-4);
        h *= std::clamp(fac, 0.2, 5.0);
      } else {
        ++res.rejected;
        h *= std::max(0.2, 0.9 * std::pow(en, -1.0 / 5.0));
      }
      if (res.steps + res.rejected > solver.max_steps) throw IntegrationError("too many steps", t, 0);
      if (h < solver.min_step * std::max(1.0, std::abs(t)) && t < target)
        throw IntegrationError("step size underflow", t, 0);
    }
    record();
  }
  return res;
}

}  // namespace nfield
