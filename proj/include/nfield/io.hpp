#pragma once

// Plain CSV/JSON artifacts. Numbers are printed with %.17g so bodies round-trip exactly and
// identical runs give byte-identical files.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfield/core.hpp"
#include "nfield/geometry.hpp"
#include "nfield/meanfield.hpp"
#include "nfield/particle.hpp"

#ifndef NFIELD_VERSION
#define NFIELD_VERSION "unknown"
#endif

namespace nfield {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal CSV writer; fields are numbers or plain identifiers, no quoting needed.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw NumericalError("cannot write " + path.string());
    row_strings(header);
  }
  CsvWriter& operator<<(double v) { return put(fmt(v)); }
  CsvWriter& operator<<(int v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(long v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(std::size_t v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(const std::string& v) { return put(v); }
  CsvWriter& operator<<(const char* v) { return put(v); }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& put(const std::string& s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) put(c);
    end_row();
  }
  std::ofstream os_;
  bool first_ = true;
};

inline std::vector<std::string> coord_header(const Domain& d) {
  if (d.dim() == 2) return {"x", "y"};
  return {"x"};
}

inline void put_coords(CsvWriter& w, const Domain& d, std::size_t j) {
  w << d.node(j).x;
  if (d.dim() == 2) w << d.node(j).y;
}

/// Time stamp used in file names: t with 6 decimals.
inline std::string time_tag(double t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%012.6f", t);
  return buf;
}

/// (x[, y], u_1..u_q) per node.
inline void write_snapshot_csv(const std::filesystem::path& path, const Domain& d, int q, const Vec& u) {
  auto h = coord_header(d);
  for (int a = 1; a <= q; ++a) h.push_back("u_" + std::to_string(a));
  CsvWriter w(path, h);
  for (std::size_t j = 0; j < d.size(); ++j) {
    put_coords(w, d, j);
    for (int a = 0; a < q; ++a) w << u(static_cast<Eigen::Index>(j) * q + a);
    w.end_row();
  }
}

/// (x[, y], m_1..m_q, V_ab for a <= b).
inline void write_field_csv(const std::filesystem::path& path, const Domain& d, const MeanFieldState& s) {
  const int q = s.q;
  auto h = coord_header(d);
  for (int a = 1; a <= q; ++a) h.push_back("m_" + std::to_string(a));
  for (int a = 1; a <= q; ++a)
    for (int b = a; b <= q; ++b) h.push_back("V_" + std::to_string(a) + std::to_string(b));
  CsvWriter w(path, h);
  const int ts = tri_size(q);
  for (std::size_t j = 0; j < d.size(); ++j) {
    put_coords(w, d, j);
    for (int a = 0; a < q; ++a) w << s.m(static_cast<Eigen::Index>(j) * q + a);
    for (int p = 0; p < ts; ++p) w << s.V(static_cast<Eigen::Index>(j) * ts + p);
    w.end_row();
  }
}

/// Long format: (t, k, alpha, re, im) for first moments and (t, k, alpha, beta, re, im) for second.
inline void write_moments_csv(const std::filesystem::path& first_path, const std::filesystem::path& second_path,
                              const std::vector<double>& times, const std::vector<ModeMoments>& mm) {
  CsvWriter w1(first_path, {"t", "k", "alpha", "re", "im"});
  CsvWriter w2(second_path, {"t", "k", "alpha", "beta", "re", "im"});
  for (std::size_t i = 0; i < mm.size(); ++i) {
    const auto& m = mm[i];
    for (int k = 0; k <= m.k_max; ++k)
      for (int a = 0; a < m.q; ++a) {
        w1 << times[i] << k << a + 1 << m.m(k, a).real() << m.m(k, a).imag();
        w1.end_row();
        for (int b = 0; b < m.q; ++b) {
          w2 << times[i] << k << a + 1 << b + 1 << m.s(k, a, b).real() << m.s(k, a, b).imag();
          w2.end_row();
        }
      }
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw NumericalError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

/// meta.json: the full resolved config plus what is needed to re-run (command, seeds, version).
inline void write_meta(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                       const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = config;
  m["version"] = NFIELD_VERSION;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["timestamp"] = buf;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_json(dir / "meta.json", m);
}

}  // namespace nfield
