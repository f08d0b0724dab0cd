#pragma once

// Small model builders shared by the unit tests.

#include <cmath>
#include <vector>

#include "nfield/model.hpp"

namespace nfield::test {

inline constexpr double kRingL = 31.41592653589793;

/// q = 1, L = 1, erf firing, one kernel, G = sigma, deterministic mean m0(x).
inline ModelSpec scalar_model(Kernel k, double alpha, double theta, double sigma,
                              std::function<double(double)> m0 = [](double) { return 0.0; }) {
  ModelSpec m;
  m.firing = {FiringRate::erf_sigmoid(alpha, theta)};
  m.kernel = KernelBlocks::scalar(std::move(k));
  m.noise.constant = Mat::Constant(1, 1, sigma);
  m.init.mean = [m0](const Point& p) { return Vec::Constant(1, m0(p.x)); };
  m.init.cov = [](const Point&) { return Mat::Zero(1, 1); };
  return m;
}

inline ModelSpec turing_model(double sigma) {
  return scalar_model(Kernel::gaussian_diff(1.5, 7.0), 10.0, 0.4, sigma,
                      [](double x) { return 0.3 * std::cos(15.0 * 3.141592653589793 * x / kRingL); });
}

/// Composite Simpson on [a, b] with an even number of panels.
template <class F>
double simpson(F f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace nfield::test
