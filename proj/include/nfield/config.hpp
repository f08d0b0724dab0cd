#pragma once

// Experiment configuration: one JSON document per run. Every block is checked against its
// key list before any computation; unknown keys and missing required blocks are rejected.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nfield/core.hpp"
#include "nfield/geometry.hpp"
#include "nfield/meanfield.hpp"
#include "nfield/model.hpp"
#include "nfield/ode.hpp"

namespace nfield {

using json = nlohmann::json;

namespace cfg {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline void allow(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(path + " must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("unknown key " + join(path, it.key()));
}

inline const json& req(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(join(path, key) + " required");
  return j.at(key);
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + " must be finite");
  return v;
}

inline double num(const json& j, const std::string& path, const std::string& key, double def) {
  return j.contains(key) ? num(j.at(key), join(path, key)) : def;
}

inline double req_num(const json& j, const std::string& path, const std::string& key) {
  return num(req(j, path, key), join(path, key));
}

inline std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(path + " must be an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const auto v = integer(j, path);
  if (v < 0) throw ConfigError(path + " must be >= 0");
  return static_cast<std::uint64_t>(v);
}

inline std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + " must be a string");
  return j.get<std::string>();
}

inline std::vector<double> num_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

/// q x q matrix from a scalar (times identity), a flat row-major list, or nested rows.
inline Mat matrix(const json& j, const std::string& path, int q) {
  if (j.is_number()) return num(j, path) * Mat::Identity(q, q);
  if (!j.is_array()) throw ConfigError(path + " must be a number or an array");
  Mat M(q, q);
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != q) throw ConfigError(path + " must have q rows");
    for (int a = 0; a < q; ++a) {
      const auto row = num_list(j[static_cast<std::size_t>(a)], path);
      if (static_cast<int>(row.size()) != q) throw ConfigError(path + " must have q columns");
      for (int b = 0; b < q; ++b) M(a, b) = row[static_cast<std::size_t>(b)];
    }
    return M;
  }
  const auto flat = num_list(j, path);
  if (static_cast<int>(flat.size()) != q * q) throw ConfigError(path + " must have q*q entries (row-major)");
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) M(a, b) = flat[static_cast<std::size_t>(a * q + b)];
  return M;
}

inline Vec vector(const json& j, const std::string& path, int q) {
  if (j.is_number()) return Vec::Constant(q, num(j, path));
  const auto v = num_list(j, path);
  if (static_cast<int>(v.size()) != q) throw ConfigError(path + " must have q entries");
  return Eigen::Map<const Vec>(v.data(), q);
}

}  // namespace cfg

// ---------------------------------------------------------------------------

struct DomainConfig {
  DomainKind kind = DomainKind::Ring;
  double l = 10.0 * kPi;
  std::size_t n = 1024;
  double R = 30.0;
  double h = 1.0;

  Domain build() const { return build_with_n(n); }
  Domain build_with_n(std::size_t nn) const {
    switch (kind) {
      case DomainKind::Ring: return build_ring(l, nn);
      case DomainKind::Interval: return build_interval(l, nn);
      case DomainKind::HexLattice: return build_hex(R, h);
    }
    return build_ring(l, nn);
  }
};

inline DomainConfig parse_domain(const json& j) {
  const std::string p = "domain";
  cfg::allow(j, p, {"kind", "l", "n", "R", "h"});
  DomainConfig d;
  const std::string kind = cfg::str(cfg::req(j, p, "kind"), "domain.kind");
  if (kind == "ring" || kind == "interval") {
    d.kind = kind == "ring" ? DomainKind::Ring : DomainKind::Interval;
    d.l = cfg::req_num(j, p, "l");
    if (j.contains("n")) {
      const auto n = cfg::integer(j.at("n"), "domain.n");
      if (n < 2) throw ConfigError("domain.n must be >= 2");
      d.n = static_cast<std::size_t>(n);
    }
    if (!(d.l > 0.0)) throw ConfigError("domain.l must be > 0");
  } else if (kind == "hex") {
    d.kind = DomainKind::HexLattice;
    d.R = cfg::req_num(j, p, "R");
    d.h = cfg::req_num(j, p, "h");
    if (!(d.R > 0.0)) throw ConfigError("domain.R must be > 0");
    if (!(d.h > 0.0 && d.h < d.R)) throw ConfigError("domain.h must be in (0, R)");
  } else {
    throw ConfigError("domain.kind must be one of ring, interval, hex");
  }
  return d;
}

inline Kernel parse_kernel(const json& j, const std::string& p) {
  cfg::allow(j, p, {"kind", "B", "C", "nu", "cutoff", "value", "s_max"});
  const std::string kind = cfg::str(cfg::req(j, p, "kind"), cfg::join(p, "kind"));
  if (kind == "gaussian_diff") return Kernel::gaussian_diff(cfg::req_num(j, p, "B"), cfg::req_num(j, p, "C"));
  if (kind == "oscillatory_decay") return Kernel::oscillatory_decay(cfg::req_num(j, p, "B"), cfg::req_num(j, p, "C"));
  if (kind == "bessel_lateral") {
    Kernel k = Kernel::bessel_lateral(cfg::req_num(j, p, "nu"), cfg::num(j, p, "cutoff", 1e-3));
    k.s_max = cfg::num(j, p, "s_max", 200.0);
    return k;
  }
  if (kind == "zero") return Kernel::zero();
  if (kind == "constant") return Kernel::constant(cfg::req_num(j, p, "value"));
  throw ConfigError(cfg::join(p, "kind") + " must be one of gaussian_diff, oscillatory_decay, bessel_lateral, zero, constant");
}

inline FiringRate parse_firing(const json& j, const std::string& p) {
  cfg::allow(j, p, {"kind", "alpha", "theta", "scale", "value"});
  const std::string kind = cfg::str(cfg::req(j, p, "kind"), cfg::join(p, "kind"));
  if (kind == "erf") return FiringRate::erf_sigmoid(cfg::req_num(j, p, "alpha"), cfg::req_num(j, p, "theta"), cfg::num(j, p, "scale", 1.0));
  if (kind == "zero") return FiringRate::zero();
  if (kind == "constant") return FiringRate::constant(cfg::req_num(j, p, "value"));
  throw ConfigError(cfg::join(p, "kind") + " must be one of erf, zero, constant");
}

/// Initial mean presets evaluated at a point.
struct MeanPreset {
  std::string kind = "constant";
  Vec value;           // constant
  double offset = 0.0; // cosine, sech-bump
  double amplitude = 0.0;
  double k = 1.0;      // cosine wavenumber
  double width = 1.0;  // sech-bump: amplitude / cosh(width x)
  double l = 1.0;
  // spiral (q = 2)
  double pitch = 20.0;
  double lag = 1.5;
  double active = 1.0;
  double recovery = 1.0;
  double rest = 0.0;
  double core = 2.0;
  bool broken = false;

  Vec operator()(const Point& x, int q) const {
    Vec m = Vec::Zero(q);
    if (kind == "constant") return value;
    if (kind == "cosine") {
      m(0) = offset + amplitude * std::cos(k * kPi * x.x / l);
      return m;
    }
    if (kind == "sech-bump") {
      m(0) = offset + amplitude / std::cosh(width * x.x);
      return m;
    }
    // Archimedean spiral: the activity front sits where the phase psi = angle - 2 pi r / pitch
    // vanishes, followed by the recovery wave; optionally only the half plane y > 0 (broken wave).
    const double r = std::hypot(x.x, x.y);
    const double psi = std::remainder(std::atan2(x.y, x.x) - 2.0 * kPi * r / pitch, 2.0 * kPi);
    const double env = r < core ? r / core : 1.0;
    const bool keep = !broken || x.y >= 0.0;
    m(0) = rest + (keep ? env * active * std::exp(-psi * psi / (2.0 * 0.35 * 0.35)) : 0.0);
    if (q > 1) {
      const double d = std::remainder(psi + lag, 2.0 * kPi);
      m(1) = keep ? env * recovery * std::exp(-d * d / (2.0 * 0.6 * 0.6)) : 0.0;
    }
    return m;
  }
};

struct CovPreset {
  std::string kind = "zero";  // zero | equilibrium | constant
  Mat value;
};

struct ModelConfig {
  ModelSpec spec;
  MeanPreset mean;
  CovPreset cov;
  double sigma = 0.0;
  bool noise_is_sigma = true;
  json raw;
};

inline Mat sigma_noise(int q, double sigma) { return sigma * Mat::Identity(q, q); }

/// Sets G = sigma I and refreshes an equilibrium initial covariance.
inline void set_sigma(ModelConfig& mc, double sigma) {
  mc.sigma = sigma;
  mc.spec.noise = {sigma_noise(mc.spec.q, sigma), {}};
  if (mc.cov.kind == "equilibrium") {
    const Mat Vs = lyapunov_equilibrium(mc.spec.L, mc.spec.noise.constant * mc.spec.noise.constant.transpose());
    mc.spec.init.cov = [Vs](const Point&) { return Vs; };
  }
}

inline ModelConfig parse_model(const json& j, const DomainConfig& dom) {
  const std::string p = "model";
  cfg::allow(j, p, {"q", "L", "firing", "kernel", "input", "noise", "init"});
  ModelConfig mc;
  mc.raw = j;
  const int q = j.contains("q") ? static_cast<int>(cfg::integer(j.at("q"), "model.q")) : 1;
  if (q < 1 || q > 8) throw ConfigError("model.q must be in [1, 8]");
  ModelSpec& m = mc.spec;
  m.q = q;
  m.L = j.contains("L") ? cfg::matrix(j.at("L"), "model.L", q) : Mat::Identity(q, q);

  const json& fr = cfg::req(j, p, "firing");
  m.firing.clear();
  if (fr.is_array()) {
    if (static_cast<int>(fr.size()) != q) throw ConfigError("model.firing must have q entries");
    for (int a = 0; a < q; ++a) m.firing.push_back(parse_firing(fr[static_cast<std::size_t>(a)], "model.firing[" + std::to_string(a) + "]"));
  } else {
    const FiringRate f = parse_firing(fr, "model.firing");
    m.firing.assign(static_cast<std::size_t>(q), f);
  }

  const json& kj = cfg::req(j, p, "kernel");
  m.kernel = KernelBlocks(q);
  if (kj.is_object() && kj.contains("blocks")) {
    cfg::allow(kj, "model.kernel", {"blocks"});
    const json& bl = kj.at("blocks");
    if (!bl.is_array() || static_cast<int>(bl.size()) != q) throw ConfigError("model.kernel.blocks must be a q x q array");
    for (int a = 0; a < q; ++a) {
      const json& row = bl[static_cast<std::size_t>(a)];
      if (!row.is_array() || static_cast<int>(row.size()) != q) throw ConfigError("model.kernel.blocks must be a q x q array");
      for (int b = 0; b < q; ++b)
        m.kernel.at(a, b) = parse_kernel(row[static_cast<std::size_t>(b)],
                                         "model.kernel.blocks[" + std::to_string(a) + "][" + std::to_string(b) + "]");
    }
  } else {
    // A single kernel couples component 0 to itself; other blocks are zero.
    m.kernel.at(0, 0) = parse_kernel(kj, "model.kernel");
  }

  m.input = {j.contains("input") ? cfg::vector(j.at("input"), "model.input", q) : Vec::Zero(q), {}};

  if (j.contains("noise")) {
    const json& nj = j.at("noise");
    cfg::allow(nj, "model.noise", {"sigma", "G"});
    if (nj.contains("G")) {
      m.noise = {cfg::matrix(nj.at("G"), "model.noise.G", q), {}};
      mc.noise_is_sigma = false;
      mc.sigma = 0.0;
    } else {
      mc.sigma = cfg::req_num(nj, "model.noise", "sigma");
      if (mc.sigma < 0.0) throw ConfigError("model.noise.sigma must be >= 0");
      m.noise = {sigma_noise(q, mc.sigma), {}};
    }
  } else {
    m.noise = {Mat::Zero(q, q), {}};
  }

  // Initial law.
  mc.mean.kind = "constant";
  mc.mean.value = Vec::Zero(q);
  mc.mean.l = dom.l;
  mc.cov.kind = "zero";
  m.init.gaussian = true;
  if (j.contains("init")) {
    const json& ij = j.at("init");
    cfg::allow(ij, "model.init", {"mean", "cov", "mode"});
    if (ij.contains("mean")) {
      const json& mj = ij.at("mean");
      cfg::allow(mj, "model.init.mean", {"preset", "value", "offset", "amplitude", "k", "width", "pitch", "lag", "active",
                                         "recovery", "rest", "core", "broken"});
      const std::string preset = cfg::str(cfg::req(mj, "model.init.mean", "preset"), "model.init.mean.preset");
      MeanPreset& mp = mc.mean;
      mp.kind = preset;
      const std::string mp_path = "model.init.mean";
      if (preset == "constant") {
        mp.value = mj.contains("value") ? cfg::vector(mj.at("value"), "model.init.mean.value", q) : Vec::Zero(q);
      } else if (preset == "cosine") {
        mp.offset = cfg::num(mj, mp_path, "offset", 0.0);
        mp.amplitude = cfg::req_num(mj, mp_path, "amplitude");
        mp.k = cfg::req_num(mj, mp_path, "k");
      } else if (preset == "sech-bump") {
        mp.offset = cfg::num(mj, mp_path, "offset", 0.0);
        mp.amplitude = cfg::req_num(mj, mp_path, "amplitude");
        mp.width = cfg::num(mj, mp_path, "width", 1.0);
      } else if (preset == "spiral") {
        mp.pitch = cfg::num(mj, mp_path, "pitch", 20.0);
        mp.lag = cfg::num(mj, mp_path, "lag", 1.5);
        mp.active = cfg::num(mj, mp_path, "active", 1.0);
        mp.recovery = cfg::num(mj, mp_path, "recovery", 1.0);
        mp.rest = cfg::num(mj, mp_path, "rest", 0.0);
        mp.core = cfg::num(mj, mp_path, "core", 2.0);
        mp.broken = mj.contains("broken") && mj.at("broken").get<bool>();
      } else {
        throw ConfigError("model.init.mean.preset must be one of constant, cosine, sech-bump, spiral");
      }
      if ((preset == "cosine" || preset == "sech-bump") && dom.kind == DomainKind::HexLattice)
        throw ConfigError("model.init.mean.preset " + preset + " needs a one-dimensional domain");
    }
    if (ij.contains("cov")) {
      const json& cj = ij.at("cov");
      cfg::allow(cj, "model.init.cov", {"preset", "value"});
      mc.cov.kind = cfg::str(cfg::req(cj, "model.init.cov", "preset"), "model.init.cov.preset");
      if (mc.cov.kind == "constant") {
        mc.cov.value = cfg::matrix(cfg::req(cj, "model.init.cov", "value"), "model.init.cov.value", q);
      } else if (mc.cov.kind != "zero" && mc.cov.kind != "equilibrium") {
        throw ConfigError("model.init.cov.preset must be one of zero, equilibrium, constant");
      }
    }
    if (ij.contains("mode")) {
      const std::string mode = cfg::str(ij.at("mode"), "model.init.mode");
      if (mode == "gaussian") m.init.gaussian = true;
      else if (mode == "deterministic") m.init.gaussian = false;
      else throw ConfigError("model.init.mode must be gaussian or deterministic");
    }
  }
  const MeanPreset mp = mc.mean;
  m.init.mean = [mp, q](const Point& x) { return mp(x, q); };
  if (mc.cov.kind == "constant") {
    const Mat V = mc.cov.value;
    if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("model.init.cov.value must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(V);
    if (es.eigenvalues().minCoeff() < -1e-12) throw ConfigError("model.init.cov.value must be positive semidefinite");
    m.init.cov = [V](const Point&) { return V; };
  } else if (mc.cov.kind == "equilibrium") {
    const Mat Vs = lyapunov_equilibrium(m.L, m.noise.constant * m.noise.constant.transpose());
    m.init.cov = [Vs](const Point&) { return Vs; };
  } else {
    m.init.cov = [q](const Point&) { return Mat::Zero(q, q); };
  }
  validate_model(m);
  return mc;
}

struct GraphConfig {
  bool sampled = false;
  double phi = 1.0;
  std::uint64_t seed = 1;
  std::string file;
};

inline GraphConfig parse_graph(const json& j) {
  cfg::allow(j, "graph", {"kind", "phi_n", "seed", "file"});
  GraphConfig g;
  const std::string kind = j.contains("kind") ? cfg::str(j.at("kind"), "graph.kind") : "averaged";
  if (kind == "sampled") g.sampled = true;
  else if (kind != "averaged") throw ConfigError("graph.kind must be averaged or sampled");
  if (g.sampled) {
    g.phi = cfg::req_num(j, "graph", "phi_n");
    if (!(g.phi > 0.0 && g.phi <= 1.0)) throw ConfigError("graph.phi_n must be in (0, 1]");
  }
  if (j.contains("seed")) g.seed = cfg::u64(j.at("seed"), "graph.seed");
  if (j.contains("file")) g.file = cfg::str(j.at("file"), "graph.file");
  return g;
}

struct RunConfig {
  double T = 1.0;
  double dt = 0.01;
  std::string solver = "rk45";
  double rtol = 1e-8;
  double atol = 1e-10;
  std::vector<double> save_times;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> n_list;
  int k_max = 20;
  bool moments = true;

  OdeSolver ode() const { return solver == "rk4" ? OdeSolver::rk4(dt) : OdeSolver::rk45(rtol, atol); }
};

inline RunConfig parse_run(const json& j) {
  cfg::allow(j, "run", {"T", "dt", "solver", "rtol", "atol", "save_times", "seeds", "n_list", "k_max", "moments"});
  RunConfig r;
  r.T = cfg::req_num(j, "run", "T");
  if (!(r.T > 0.0)) throw ConfigError("run.T must be > 0");
  r.dt = cfg::num(j, "run", "dt", 0.01);
  if (!(r.dt > 0.0)) throw ConfigError("run.dt must be > 0");
  if (j.contains("solver")) {
    r.solver = cfg::str(j.at("solver"), "run.solver");
    if (r.solver != "rk4" && r.solver != "rk45") throw ConfigError("run.solver must be rk4 or rk45");
  }
  r.rtol = cfg::num(j, "run", "rtol", 1e-8);
  r.atol = cfg::num(j, "run", "atol", 1e-10);
  if (j.contains("save_times")) r.save_times = cfg::num_list(j.at("save_times"), "run.save_times");
  else r.save_times = {r.T};
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    r.seeds.clear();
    if (s.is_array())
      for (std::size_t i = 0; i < s.size(); ++i) r.seeds.push_back(cfg::u64(s[i], "run.seeds"));
    else
      for (std::uint64_t i = 1; i <= cfg::u64(s, "run.seeds"); ++i) r.seeds.push_back(i);
  }
  if (j.contains("n_list")) {
    const json& s = j.at("n_list");
    if (!s.is_array()) throw ConfigError("run.n_list must be an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto n = cfg::integer(s[i], "run.n_list");
      if (n < 2) throw ConfigError("run.n_list entries must be >= 2");
      r.n_list.push_back(static_cast<std::size_t>(n));
    }
  }
  if (j.contains("k_max")) r.k_max = static_cast<int>(cfg::integer(j.at("k_max"), "run.k_max"));
  if (j.contains("moments")) r.moments = j.at("moments").get<bool>();
  return r;
}

struct ScanConfig {
  double sigma_min = 0.0;
  double sigma_max = 1.2;
  double sigma_step = 0.01;
  int k_max = 20;
};

inline ScanConfig parse_scan(const json& j) {
  cfg::allow(j, "scan", {"sigma_min", "sigma_max", "sigma_step", "k_max"});
  ScanConfig s;
  s.sigma_min = cfg::num(j, "scan", "sigma_min", 0.0);
  s.sigma_max = cfg::num(j, "scan", "sigma_max", 1.2);
  s.sigma_step = cfg::num(j, "scan", "sigma_step", 0.01);
  if (j.contains("k_max")) s.k_max = static_cast<int>(cfg::integer(j.at("k_max"), "scan.k_max"));
  if (!(s.sigma_step > 0.0) || s.sigma_max < s.sigma_min) throw ConfigError("scan: invalid sigma range");
  return s;
}

struct ContinuationConfig {
  int steps = 100;
  double ds = 0.02;
  double ds_max = 0.2;
  double sigma_max = 1.5;
  std::vector<std::string> branches{"homogeneous", "turing"};
  double delta = 1e-2;
  int profiles_every = 0;
  int k = -1;  // wavenumber for pattern branches; -1: that of the first crossing
};

inline ContinuationConfig parse_continuation(const json& j) {
  cfg::allow(j, "continuation", {"steps", "ds", "ds_max", "sigma_max", "branches", "delta", "profiles_every", "k"});
  ContinuationConfig c;
  if (j.contains("steps")) c.steps = static_cast<int>(cfg::integer(j.at("steps"), "continuation.steps"));
  c.ds = cfg::num(j, "continuation", "ds", c.ds);
  c.ds_max = cfg::num(j, "continuation", "ds_max", c.ds_max);
  c.sigma_max = cfg::num(j, "continuation", "sigma_max", c.sigma_max);
  c.delta = cfg::num(j, "continuation", "delta", c.delta);
  if (j.contains("k")) c.k = static_cast<int>(cfg::integer(j.at("k"), "continuation.k"));
  if (j.contains("profiles_every")) c.profiles_every = static_cast<int>(cfg::integer(j.at("profiles_every"), "continuation.profiles_every"));
  if (j.contains("branches")) {
    c.branches.clear();
    for (const auto& b : j.at("branches")) {
      const std::string s = cfg::str(b, "continuation.branches");
      if (s != "homogeneous" && s != "turing" && s != "turing2")
        throw ConfigError("continuation.branches entries must be homogeneous, turing or turing2");
      c.branches.push_back(s);
    }
  }
  return c;
}

struct ActionConfig {
  std::size_t steps = 200;
  std::vector<double> epsilons;
};

inline ActionConfig parse_action(const json& j) {
  cfg::allow(j, "action", {"steps", "epsilons"});
  ActionConfig a;
  if (j.contains("steps")) a.steps = static_cast<std::size_t>(cfg::integer(j.at("steps"), "action.steps"));
  if (j.contains("epsilons")) a.epsilons = cfg::num_list(j.at("epsilons"), "action.epsilons");
  return a;
}

struct SpiralConfig {
  std::vector<double> sigmas{0.45, 0.0};
  double window_start = 20.0;
};

inline SpiralConfig parse_spiral(const json& j) {
  cfg::allow(j, "spiral", {"sigmas", "window_start"});
  SpiralConfig s;
  if (j.contains("sigmas")) s.sigmas = cfg::num_list(j.at("sigmas"), "spiral.sigmas");
  s.window_start = cfg::num(j, "spiral", "window_start", s.window_start);
  return s;
}

struct ExperimentConfig {
  std::string name;
  DomainConfig domain;
  ModelConfig model;
  GraphConfig graph;
  RunConfig run;
  std::optional<ScanConfig> scan;
  std::optional<ContinuationConfig> continuation;
  std::optional<ActionConfig> action;
  std::optional<SpiralConfig> spiral;
  json raw;
};

inline ExperimentConfig parse_config(const json& j) {
  cfg::allow(j, "", {"name", "description", "domain", "model", "graph", "run", "scan", "continuation", "action", "spiral"});
  ExperimentConfig c;
  c.raw = j;
  if (j.contains("name")) c.name = cfg::str(j.at("name"), "name");
  c.domain = parse_domain(cfg::req(j, "", "domain"));
  c.model = parse_model(cfg::req(j, "", "model"), c.domain);
  if (j.contains("graph")) c.graph = parse_graph(j.at("graph"));
  c.run = parse_run(cfg::req(j, "", "run"));
  if (j.contains("scan")) c.scan = parse_scan(j.at("scan"));
  if (j.contains("continuation")) c.continuation = parse_continuation(j.at("continuation"));
  if (j.contains("action")) c.action = parse_action(j.at("action"));
  if (j.contains("spiral")) c.spiral = parse_spiral(j.at("spiral"));
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace nfield
