#include "nfield/cli.hpp"

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfield/analysis.hpp"
#include "nfield/bifurcation.hpp"
#include "nfield/config.hpp"
#include "nfield/graph.hpp"
#include "nfield/io.hpp"
#include "nfield/meanfield.hpp"
#include "nfield/particle.hpp"

namespace fs = std::filesystem;

namespace nfield {
namespace {

struct Context {
  ExperimentConfig cfg;
  fs::path out;
  std::ostream* log = nullptr;
  std::string command;
};

json resolved(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  const Domain d = c.domain.build();
  json dom;
  dom["kind"] = to_string(d.kind());
  if (d.kind() == DomainKind::HexLattice) {
    dom["R"] = c.domain.R;
    dom["h"] = c.domain.h;
  } else {
    dom["l"] = c.domain.l;
  }
  dom["n"] = d.size();
  dom["measure"] = d.measure();
  j["domain"] = dom;
  j["model"] = c.model.raw;
  j["graph"] = {{"kind", c.graph.sampled ? "sampled" : "averaged"}, {"phi_n", c.graph.phi}, {"seed", c.graph.seed}};
  if (!c.graph.file.empty()) j["graph"]["file"] = c.graph.file;
  j["run"] = {{"T", c.run.T},          {"dt", c.run.dt},     {"solver", c.run.solver},
              {"rtol", c.run.rtol},    {"atol", c.run.atol}, {"save_times", c.run.save_times},
              {"seeds", c.run.seeds},  {"n_list", c.run.n_list}, {"k_max", c.run.k_max}};
  if (c.raw.contains("scan")) j["scan"] = c.raw["scan"];
  if (c.raw.contains("continuation")) j["continuation"] = c.raw["continuation"];
  if (c.raw.contains("action")) j["action"] = c.raw["action"];
  if (c.raw.contains("spiral")) j["spiral"] = c.raw["spiral"];
  return j;
}

void require_ring(const Domain& d, const std::string& what) {
  if (d.kind() != DomainKind::Ring) throw ConfigError("domain.kind must be ring for " + what);
}

std::string seed_tag(std::uint64_t s) { return "s" + std::to_string(s); }

Connectivity make_connectivity(const Context& ctx, const Domain& d, json& meta) {
  const ExperimentConfig& c = ctx.cfg;
  if (!c.graph.sampled) {
    meta["connectivity"] = "averaged";
    return Connectivity::averaged(d, c.model.spec.kernel);
  }
  SampledGraph g;
  if (!c.graph.file.empty()) {
    g = read_csr(c.graph.file);
    if (g.n != d.size() || g.q != c.model.spec.q) throw ConfigError("graph.file does not match domain.n and model.q");
  } else {
    g = sample_graph(d, c.model.spec.kernel, c.graph.phi, c.graph.seed);
  }
  const auto diag = sparsity_diagnostics(g, d, c.model.spec.kernel);
  meta["connectivity"] = "sampled";
  meta["graph"] = {{"nnz", g.nnz()},
                   {"phi_n", g.phi},
                   {"seed", g.seed},
                   {"max_row_nnz_over_nphi", diag.max_row_nnz_over_nphi},
                   {"centered_opnorm_est", diag.centered_opnorm_est}};
  return Connectivity::sampled(std::move(g));
}

// ---------------------------------------------------------------------------

int cmd_simulate_particle(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const Domain d = c.domain.build();
  json meta;
  meta["nodes"] = d.size();
  const Connectivity conn = make_connectivity(ctx, d, meta);
  validate_initial_covariance(c.model.spec, d);
  SimulateOptions so;
  so.deterministic_init = !c.model.spec.init.gaussian;
  const int q = c.model.spec.q;
  for (std::uint64_t seed : c.run.seeds) {
    const SdePath p = simulate(c.model.spec, d, conn, c.run.T, c.run.dt, seed, c.run.save_times, so);
    for (std::size_t i = 0; i < p.times.size(); ++i)
      write_snapshot_csv(ctx.out / ("particle_" + seed_tag(seed) + "_t" + time_tag(p.times[i]) + ".csv"), d, q,
                         p.snapshots[i]);
    if (c.run.moments && d.kind() == DomainKind::Ring)
      write_moments_csv(ctx.out / ("moments_first_" + seed_tag(seed) + ".csv"),
                        ctx.out / ("moments_second_" + seed_tag(seed) + ".csv"), p.times,
                        empirical_moments(p, d, q, c.run.k_max));
    *ctx.log << "seed " << seed << ": " << p.times.size() << " snapshots\n";
  }
  meta["seeds"] = c.run.seeds;
  write_meta(ctx.out, ctx.command, c.raw, meta);
  return kExitOk;
}

int cmd_simulate_meanfield(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const Domain d = c.domain.build();
  validate_initial_covariance(c.model.spec, d);
  std::vector<double> ts;
  for (double t : c.run.save_times)
    if (t > 0.0) ts.push_back(t);
  if (ts.empty() || ts.back() < c.run.T) ts.push_back(c.run.T);
  auto states = mf_integrate(c.model.spec, d, c.run.T, c.run.ode(), ts);
  if (!c.run.save_times.empty() && c.run.save_times.front() == 0.0)
    states.insert(states.begin(), meanfield_initial(c.model.spec, d));
  for (const auto& s : states) write_field_csv(ctx.out / ("field_t" + time_tag(s.t) + ".csv"), d, s);
  const auto [dm, dV] = mf_rhs(states.back(), c.model.spec, d);
  const double res = std::max(dm.cwiseAbs().maxCoeff(), dV.cwiseAbs().maxCoeff());
  json meta = {{"nodes", d.size()}, {"final_residual", res}};
  if (d.kind() == DomainKind::Ring && c.model.spec.q == 1) meta["dominant_mode"] = dominant_mode(states.back().m);
  *ctx.log << "T = " << c.run.T << ", residual " << res << "\n";
  write_meta(ctx.out, ctx.command, c.raw, meta);
  return kExitOk;
}

std::vector<double> sigma_grid(const ScanConfig& s) {
  std::vector<double> g;
  const auto steps = static_cast<int>(std::llround((s.sigma_max - s.sigma_min) / s.sigma_step));
  for (int i = 0; i <= steps; ++i) g.push_back(s.sigma_min + i * s.sigma_step);
  return g;
}

int cmd_turing_scan(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  if (!c.scan) throw ConfigError("scan required");
  require_ring(c.domain.build(), "turing-scan");
  const DispersionScan scan = turing_scan(c.model.spec, c.domain.l, sigma_grid(*c.scan), c.scan->k_max);
  {
    CsvWriter w(ctx.out / "scan.csv", {"sigma", "k", "gamma"});
    for (std::size_t i = 0; i < scan.sigma_grid.size(); ++i)
      for (std::size_t k = 0; k < scan.k_range.size(); ++k) {
        w << scan.sigma_grid[i] << scan.k_range[k] << scan.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        w.end_row();
      }
  }
  {
    CsvWriter w(ctx.out / "bifurcations.csv", {"k", "sigma_lo", "sigma_hi", "direction", "slope"});
    for (const auto& b : scan.bifurcations) {
      w << b.k << b.sigma_lo << b.sigma_hi << b.direction << b.slope;
      w.end_row();
    }
  }
  json meta;
  if (const Bifurcation* b = scan.first()) {
    meta["first"] = {{"k", b->k}, {"sigma_lo", b->sigma_lo}, {"sigma_hi", b->sigma_hi}};
    *ctx.log << "first crossing: k = " << b->k << ", sigma in [" << b->sigma_lo << ", " << b->sigma_hi << "]\n";
  } else {
    *ctx.log << "no destabilising crossing on the grid\n";
  }
  write_meta(ctx.out, ctx.command, c.raw, meta);
  return kExitOk;
}

int cmd_continue(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  if (!c.continuation) throw ConfigError("continuation required");
  const ContinuationConfig& cc = *c.continuation;
  const Domain d = c.domain.build();
  require_ring(d, "continue");
  const ModelSpec& model = c.model.spec;
  const SteadyProblem P(model, d);
  ContinuationOptions opt;
  opt.steps = cc.steps;
  opt.ds = cc.ds;
  opt.ds_max = cc.ds_max;
  opt.sigma_max = cc.sigma_max;
  const double s0 = c.scan ? c.scan->sigma_min : 0.0;
  opt.sigma_min = s0;
  std::vector<std::pair<std::string, Branch>> branches;
  json meta;
  for (const auto& which : cc.branches) {
    if (which == "homogeneous") {
      branches.emplace_back("homogeneous", continue_branch(P, model, c.domain.l, s0, +1, opt));
    } else {
      const ScanConfig sc = c.scan ? *c.scan : ScanConfig{};
      const DispersionScan scan = turing_scan(model, c.domain.l, sigma_grid(sc), sc.k_max);
      const Bifurcation* first = scan.first();
      if (!first) throw NumericalError("continue: no Turing point on the scan grid");
      const int k = cc.k >= 0 ? cc.k : first->k;
      // turing: first crossing of gamma_k; turing2: the next crossing of gamma_k in the opposite direction.
      const Bifurcation* b = nullptr;
      for (const auto& x : scan.bifurcations) {
        if (x.k != k) continue;
        if (which == "turing" && x.direction > 0) {
          b = &x;
          break;
        }
        if (which == "turing2" && x.direction < 0) {
          b = &x;
          break;
        }
      }
      if (!b) throw NumericalError("continue: gamma_" + std::to_string(k) + " has no " + which + " crossing on the grid");
      meta[which] = {{"k", k}, {"sigma", b->sigma()}};
      branches.emplace_back(which + "_k" + std::to_string(k),
                            continue_pattern_branch(P, d, model, b->sigma(), k, opt, cc.delta));
    }
  }
  CsvWriter w(ctx.out / "branches.csv", {"branch", "index", "sigma", "norm2", "max_m", "stability", "stable", "fold"});
  for (const auto& [name, br] : branches) {
    for (std::size_t i = 0; i < br.points.size(); ++i) {
      const auto& p = br.points[i];
      w << name << i << p.sigma << p.norm2 << p.max_m << p.stability << (p.stable ? 1 : 0) << (p.fold ? 1 : 0);
      w.end_row();
      if (cc.profiles_every > 0 && i % static_cast<std::size_t>(cc.profiles_every) == 0) {
        MeanFieldState s;
        s.q = 1;
        s.m = p.m;
        s.V = Vec::Constant(p.m.size(), equilibrium_variance(model, p.sigma));
        write_field_csv(ctx.out / ("profile_" + name + "_" + std::to_string(i) + ".csv"), d, s);
      }
    }
    meta["branches"][name] = {{"points", br.points.size()}, {"status", br.status}};
    *ctx.log << name << ": " << br.points.size() << " points (" << br.status << ")\n";
  }
  write_meta(ctx.out, ctx.command, c.raw, meta);
  return kExitOk;
}

int cmd_convergence(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  require_ring(c.domain.build(), "convergence");
  if (c.run.n_list.empty()) throw ConfigError("run.n_list required");
  ConvergenceOptions opt;
  opt.dt = c.run.dt;
  opt.deterministic_init = !c.model.spec.init.gaussian;
  opt.progress = [&ctx](std::size_t n, std::uint64_t seed) { *ctx.log << "n = " << n << ", seed " << seed << " done\n"; };
  const ConvergenceReport rep =
      convergence_study(c.model.spec, c.domain.l, c.run.n_list, c.run.seeds, c.run.T, c.run.k_max, opt);
  {
    CsvWriter w(ctx.out / "convergence.csv", {"n", "k", "E_m", "E_V", "E"});
    for (std::size_t ni = 0; ni < rep.n_list.size(); ++ni)
      for (int k = 0; k <= rep.k_max; ++k) {
        w << rep.n_list[ni] << k << rep.median_Em(ni, k) << rep.median_EV(ni, k) << rep.median_E(ni, k);
        w.end_row();
      }
  }
  {
    CsvWriter w(ctx.out / "convergence_seeds.csv", {"n", "seed", "k", "E_m", "E_V", "E"});
    for (std::size_t ni = 0; ni < rep.n_list.size(); ++ni)
      for (std::size_t si = 0; si < rep.errors[ni].size(); ++si) {
        const auto& e = rep.errors[ni][si];
        if (e.E.empty()) continue;
        for (int k = 0; k <= rep.k_max; ++k) {
          const auto kk = static_cast<std::size_t>(k);
          w << rep.n_list[ni] << rep.seeds[si] << k << e.Em[kk] << e.EV[kk] << e.E[kk];
          w.end_row();
        }
      }
  }
  {
    CsvWriter w(ctx.out / "fit.csv", {"k", "slope", "intercept", "half_width"});
    for (int k = 0; k <= rep.k_max; ++k) {
      const auto& f = rep.fit_E[static_cast<std::size_t>(k)];
      w << k << f.slope << f.intercept << f.half_width;
      w.end_row();
    }
  }
  {
    CsvWriter w(ctx.out / "pointwise.csv", {"n", "seed", "dispersion"});
    for (std::size_t ni = 0; ni < rep.n_list.size(); ++ni)
      for (std::size_t si = 0; si < rep.pointwise[ni].size(); ++si) {
        w << rep.n_list[ni] << rep.seeds[si] << rep.pointwise[ni][si];
        w.end_row();
      }
  }
  write_meta(ctx.out, ctx.command, c.raw, {{"failures", rep.failures}, {"seeds", rep.seeds}});
  return kExitOk;
}

int cmd_action(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const ActionConfig ac = c.action ? *c.action : ActionConfig{};
  const Domain d = c.domain.build();
  const ControlledPath path = meanfield_path(c.model.spec, d, c.run.T, ac.steps);
  const ActionResult r = action_functional(path, c.model.spec, d);
  json out = {{"J", r.J}, {"time_grid", path.times}, {"discretization_estimate", r.discretization_estimate}};
  if (!ac.epsilons.empty()) {
    const double l = d.kind() == DomainKind::HexLattice ? c.domain.R : d.half_width();
    json pert = json::array();
    for (double eps : ac.epsilons) {
      ControlledPath p = path;
      for (std::size_t i = 0; i < p.times.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j)
          p.u[i](static_cast<Eigen::Index>(j) * c.model.spec.q) += eps * std::cos(kPi * d.node(j).x / l) * p.times[i];
      pert.push_back({{"epsilon", eps}, {"J", action_functional(p, c.model.spec, d).J}});
    }
    out["perturbations"] = pert;
  }
  write_json(ctx.out / "action.json", out);
  *ctx.log << "J = " << r.J << " (discretisation estimate " << r.discretization_estimate << ")\n";
  write_meta(ctx.out, ctx.command, c.raw);
  return kExitOk;
}

int cmd_spiral(Context& ctx) {
  ExperimentConfig& c = ctx.cfg;
  const SpiralConfig sc = c.spiral ? *c.spiral : SpiralConfig{};
  const Domain d = c.domain.build();
  if (c.model.spec.q < 2) throw ConfigError("model.q must be 2 for spiral");
  auto op = std::make_shared<const AveragedCoupling>(d, c.model.spec.kernel);
  std::vector<double> ts;
  for (double t : c.run.save_times)
    if (t > 0.0) ts.push_back(t);
  if (ts.empty() || ts.back() < c.run.T) ts.push_back(c.run.T);
  CsvWriter obs(ctx.out / "observables.csv", {"sigma", "t", "activity", "phase"});
  const int q = c.model.spec.q;
  for (double sigma : sc.sigmas) {
    set_sigma(c.model, sigma);
    auto states = mf_integrate(c.model.spec, d, c.run.T, c.run.ode(), ts, nullptr, op);
    states.insert(states.begin(), meanfield_initial(c.model.spec, d));
    for (const auto& s : states) {
      double a = 0.0, mean = 0.0;
      for (std::size_t j = 0; j < d.size(); ++j) {
        const double m = s.m(static_cast<Eigen::Index>(j) * q);
        a += d.weights()[j] * m * m;
        mean += m;
      }
      mean /= static_cast<double>(d.size());
      std::complex<double> z = 0.0;
      for (std::size_t j = 0; j < d.size(); ++j)
        z += (s.m(static_cast<Eigen::Index>(j) * q) - mean) * std::polar(1.0, std::atan2(d.node(j).y, d.node(j).x));
      obs << sigma << s.t << std::sqrt(a) << std::arg(z);
      obs.end_row();
      char tag[64];
      std::snprintf(tag, sizeof tag, "spiral_sigma%.4f_t", sigma);
      write_field_csv(ctx.out / (tag + time_tag(s.t) + ".csv"), d, s);
    }
    *ctx.log << "sigma = " << sigma << " done\n";
  }
  write_meta(ctx.out, ctx.command, c.raw, {{"nodes", d.size()}});
  return kExitOk;
}

int cmd_graph_sample(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const Domain d = c.domain.build();
  const double phi = c.graph.sampled ? c.graph.phi : 1.0;
  const SampledGraph g = sample_graph(d, c.model.spec.kernel, phi, c.graph.seed);
  write_csr(g, (ctx.out / "graph.csr").string());
  const auto diag = sparsity_diagnostics(g, d, c.model.spec.kernel);
  json meta = {{"nodes", d.size()},
               {"nnz", g.nnz()},
               {"phi_n", phi},
               {"seed", c.graph.seed},
               {"max_row_nnz_over_nphi", diag.max_row_nnz_over_nphi},
               {"centered_opnorm_est", diag.centered_opnorm_est}};
  *ctx.log << "nnz = " << g.nnz() << "\n";
  write_meta(ctx.out, ctx.command, c.raw, meta);
  return kExitOk;
}

int cmd_validate(Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const Domain d = c.domain.build();
  validate_initial_covariance(c.model.spec, d);
  if (c.graph.sampled) check_probabilities(d, c.model.spec.kernel, c.graph.phi);
  const double det = min_abs_det_noise(c.model.spec, d, c.run.T);
  *ctx.log << "ok: " << d.size() << " nodes, q = " << c.model.spec.q << ", min |det G| = " << det << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic neural networks on random graphs and their Gaussian mean-field limit", "nfield"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool dry_run = false;
  auto* o_seed = app.add_option("--seed", seed, "Replace run.seeds with this single seed");
  app.add_option("--config", config_path, "Experiment config (JSON)");
  app.add_option("--out", out_dir, "Artifact directory (default out/<name>)");
  app.add_option("--threads", threads, "Worker threads (default: OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--dry-run", dry_run, "Validate and print the resolved config without computing");

  using Cmd = int (*)(Context&);
  const std::vector<std::tuple<std::string, std::string, Cmd>> cmds = {
      {"simulate-particle", "Euler-Maruyama run of the particle system", cmd_simulate_particle},
      {"simulate-meanfield", "Integrate the Gaussian mean-field equations", cmd_simulate_meanfield},
      {"turing-scan", "Dispersion curves of the homogeneous state", cmd_turing_scan},
      {"continue", "Continuation of homogeneous and pattern branches", cmd_continue},
      {"convergence", "Weak convergence study of mode errors", cmd_convergence},
      {"action", "Action functional along the mean-field path", cmd_action},
      {"spiral", "Two-population model on the hexagon with and without noise", cmd_spiral},
      {"graph-sample", "Sample and store a connectivity graph", cmd_graph_sample},
      {"validate", "Check a config and its model", cmd_validate},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : cmds) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    subs.push_back(s);
  }

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::size_t which = 0;
  for (; which < subs.size(); ++which)
    if (subs[which]->parsed()) break;
  const std::string command = std::get<0>(cmds[which]);
  try {
    if (config_path.empty()) throw ConfigError("--config required");
    Context ctx;
    ctx.cfg = load_config(config_path);
    ctx.command = command;
    ctx.log = &out;
    if (o_seed->count() > 0) {
      ctx.cfg.run.seeds = {seed};
      ctx.cfg.raw["run"]["seeds"] = json::array({seed});
    }
    if (threads > 0) omp_set_num_threads(threads);
    if (dry_run) {
      out << resolved(ctx.cfg).dump(2) << "\n";
      return kExitOk;
    }
    if (command == "validate") return cmd_validate(ctx);
    ctx.out = out_dir.empty() ? fs::path("out") / (ctx.cfg.name.empty() ? command : ctx.cfg.name) : fs::path(out_dir);
    fs::create_directories(ctx.out);
    return std::get<2>(cmds[which])(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace nfield
