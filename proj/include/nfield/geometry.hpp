#pragma once

// Cortical domains: deterministic node placement, metric and equal-weight quadrature.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nfield/core.hpp"

namespace nfield {

enum class DomainKind { Ring, Interval, HexLattice };

inline std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Ring: return "ring";
    case DomainKind::Interval: return "interval";
    case DomainKind::HexLattice: return "hex";
  }
  return "unknown";
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Immutable after construction.
class Domain {
 public:
  DomainKind kind() const { return kind_; }
  int dim() const { return kind_ == DomainKind::HexLattice ? 2 : 1; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const Point& node(std::size_t j) const { return nodes_[j]; }

  /// Lebesgue measure |D|.
  double measure() const { return measure_; }
  /// Half width l (ring and interval).
  double half_width() const { return l_; }
  /// Circumradius R and lattice spacing h (hex lattice).
  double circumradius() const { return radius_; }
  double spacing() const { return spacing_; }
  bool periodic() const { return kind_ == DomainKind::Ring; }

  double distance(const Point& a, const Point& b) const {
    if (kind_ == DomainKind::HexLattice) return std::hypot(a.x - b.x, a.y - b.y);
    const double d = std::abs(a.x - b.x);
    if (kind_ == DomainKind::Ring) return std::min(d, 2.0 * l_ - d);
    return d;
  }
  double distance(std::size_t i, std::size_t j) const { return distance(nodes_[i], nodes_[j]); }

 private:
  friend Domain build_ring(double, std::size_t);
  friend Domain build_interval(double, std::size_t);
  friend Domain build_hex(double, double);

  DomainKind kind_ = DomainKind::Ring;
  std::vector<Point> nodes_;
  std::vector<double> weights_;
  double measure_ = 0.0;
  double l_ = 0.0;
  double radius_ = 0.0;
  double spacing_ = 0.0;
};

/// n equispaced nodes x_j = -l + 2lj/n on the periodic ring [-l, l).
inline Domain build_ring(double l, std::size_t n) {
  if (!(l > 0.0)) throw ConfigError("domain.l must be > 0");
  if (n < 2) throw ConfigError("domain.n must be >= 2");
  Domain d;
  d.kind_ = DomainKind::Ring;
  d.l_ = l;
  d.measure_ = 2.0 * l;
  d.nodes_.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    d.nodes_[j].x = -l + 2.0 * l * static_cast<double>(j) / static_cast<double>(n);
  d.weights_.assign(n, 2.0 * l / static_cast<double>(n));
  return d;
}

/// Midpoint nodes on the non-periodic interval [-l, l].
inline Domain build_interval(double l, std::size_t n) {
  if (!(l > 0.0)) throw ConfigError("domain.l must be > 0");
  if (n < 2) throw ConfigError("domain.n must be >= 2");
  Domain d;
  d.kind_ = DomainKind::Interval;
  d.l_ = l;
  d.measure_ = 2.0 * l;
  d.nodes_.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    d.nodes_[j].x = -l + 2.0 * l * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
  d.weights_.assign(n, 2.0 * l / static_cast<double>(n));
  return d;
}

/// Signed distance surrogate for the regular hexagon with vertices at angles 0, 60, ..., 300
/// degrees: max over the three edge normals of |p.n| minus the apothem.
inline double hexagon_signed_distance(const Point& p, double R) {
  const double apothem = R * std::sqrt(3.0) / 2.0;
  const double s = std::sqrt(3.0) / 2.0;
  const double a = std::abs(p.y);
  const double b = std::abs(s * p.x + 0.5 * p.y);
  const double c = std::abs(s * p.x - 0.5 * p.y);
  return std::max({a, b, c}) - apothem;
}

/// Triangular lattice with a node at the origin and rows offset by h/2, clipped to the
/// hexagon of circumradius R.
inline Domain build_hex(double R, double h) {
  if (!(R > 0.0)) throw ConfigError("domain.R must be > 0");
  if (!(h > 0.0)) throw ConfigError("domain.h must be > 0");
  if (h >= R) throw ConfigError("domain.h must be < domain.R");
  Domain d;
  d.kind_ = DomainKind::HexLattice;
  d.radius_ = R;
  d.spacing_ = h;
  d.measure_ = 1.5 * std::sqrt(3.0) * R * R;
  const double row = h * std::sqrt(3.0) / 2.0;
  const long jmax = static_cast<long>(std::ceil(R / row)) + 1;
  const long imax = static_cast<long>(std::ceil(R / h)) + jmax + 1;
  for (long j = -jmax; j <= jmax; ++j) {
    for (long i = -imax; i <= imax; ++i) {
      Point p{h * (static_cast<double>(i) + 0.5 * static_cast<double>(j)), row * static_cast<double>(j)};
      if (hexagon_signed_distance(p, R) <= 1e-9) d.nodes_.push_back(p);
    }
  }
  d.weights_.assign(d.nodes_.size(), d.measure_ / static_cast<double>(d.nodes_.size()));
  return d;
}

}  // namespace nfield
