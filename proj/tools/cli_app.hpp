#pragma once

#include <CLI11.hpp>

#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "polyrad/polyrad.hpp"

namespace polyrad::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int { kOk = 0, kConfig = 2, kNumeric = 3, kBracket = 4, kVerification = 5 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidControls:
    case ErrorKind::Io:
      return kConfig;
    case ErrorKind::BracketFailure:
      return kBracket;
    default:
      return kNumeric;
  }
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Key holding the wall-clock time; everything else in a report is deterministic.
inline constexpr const char* kTimestampKey = "timestamp";

inline json metadata() { return json{{"tool", "polyrad"}, {kTimestampKey, utc_timestamp()}}; }

/// Drops metadata.timestamp so two reports can be compared byte for byte.
inline std::string comparable(json report) {
  if (report.contains("metadata")) report["metadata"].erase(kTimestampKey);
  return report.dump(2);
}

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
};

inline fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  if (fs::exists(dir) && !fs::is_empty(dir) && !cfg.force) {
    throw Error(ErrorKind::Config, "output directory '" + dir.string() + "' exists and is not empty (use --force)");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
  return dir;
}

inline ProblemSpec spec_from(const RunConfig& cfg) {
  const int dim = cfg.require_dim();
  ProblemSpec spec;
  spec.dim = dim;
  spec.order = cfg.order;
  if (cfg.p) spec.nonlinearity = Nonlinearity::negative_power(*cfg.p);
  if (!cfg.init.empty()) {
    spec.init = cfg.init;
  } else if (cfg.order == 1) {
    const double u0 = cfg.alpha != 0.0 || !cfg.p ? cfg.alpha : 1.0;
    spec.init = {u0, cfg.beta.value_or(0.0)};
  } else {
    throw Error(ErrorKind::Config, "order > 1 needs the full 'init' vector");
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return spec;
}

inline IntegrationControls controls_from(const RunConfig& cfg, double default_r_max) {
  auto c = cfg.controls(default_r_max);
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return c;
}

inline int cmd_integrate(Context& ctx) {
  const auto spec = spec_from(ctx.cfg);
  const auto controls = controls_from(ctx.cfg, 40.0);
  const auto dir = prepare_out_dir(ctx.cfg);
  const auto traj = integrate(spec, controls);
  io::write_trajectory(traj, dir / "trajectory");
  const auto& t = traj.termination();
  const auto end = traj.back();
  ctx.out << "termination " << to_string(t.kind) << " at r = " << io::format_double(t.radius) << "\n"
          << "nodes " << traj.size() << ", u(end) = " << io::format_double(end.u()) << "\n";
  if (t.kind == TerminationKind::Blowup) ctx.out << "R_est " << io::format_double(t.fitted_radius) << "\n";
  if (t.kind == TerminationKind::StepUnderflow || t.kind == TerminationKind::StepLimit) {
    ctx.err << "integration failed: " << to_string(t.kind) << "\n";
    return kNumeric;
  }
  return kOk;
}

inline int cmd_shoot(Context& ctx) {
  const int dim = ctx.cfg.require_dim();
  const auto controls = controls_from(ctx.cfg, default_horizon(dim));
  const auto dir = prepare_out_dir(ctx.cfg);
  const auto res = find_separatrix(dim, controls.r_max, ctx.cfg.tol_beta, controls);
  io::write_text(dir / "separatrix.json", io::dump(io::to_json(res)));
  io::write_trajectory(res.separatrix, dir / "trajectory");
  ctx.out << "beta0_est " << io::format_double(res.beta0_est) << "\n"
          << "bracket [" << io::format_double(res.beta_lo) << ", " << io::format_double(res.beta_hi) << "]\n"
          << "shots " << res.shots << "\n";
  return kOk;
}

inline int cmd_scan_n2(Context& ctx) {
  const auto controls = controls_from(ctx.cfg, 40.0);
  auto betas = ctx.cfg.betas;
  if (ctx.cfg.beta) betas = {*ctx.cfg.beta};
  if (betas.empty()) betas = checks::linspace(-100.0, 10.0, 33);
  std::sort(betas.begin(), betas.end());
  auto lattices = ctx.cfg.lattices;
  if (lattices.empty() && !ctx.cfg.beta) lattices = checks::order_two_lattice({-5.0, -1.0, 1.0});
  const auto dir = prepare_out_dir(ctx.cfg);
  const auto scan = scan_n2(betas, controls);
  const auto lat = scan_inits(2, lattices, controls);
  io::write_text(dir / "scan.csv", io::scan_csv(scan));
  io::write_text(dir / "scan.json", io::dump(json{{"betas", io::to_json(scan)}, {"lattices", io::to_json(lat)}}));
  ctx.out << "betas " << scan.entries.size() << ", not blowup " << scan.falsifications.size()
          << ", monotonicity violations " << scan.monotonicity_violations.size() << "\n"
          << "lattices " << lat.entries.size() << ", not blowup " << lat.falsifications.size() << "\n";
  return kOk;
}

inline int cmd_negpower_scan(Context& ctx) {
  const auto controls = controls_from(ctx.cfg, kSurvivalHorizon);
  const int dim = ctx.cfg.dim.value_or(kDefaultNegPowerDim);
  std::vector<double> ps = ctx.cfg.p_values;
  if (ctx.cfg.p) ps = {*ctx.cfg.p};
  if (ps.empty()) ps = {0.25, 0.5, 0.75, 1.0, 2.0};
  const auto a_grid = ctx.cfg.a_grid.empty() ? default_a_grid() : ctx.cfg.a_grid;
  const auto b_grid = ctx.cfg.b_grid.empty() ? default_b_grid() : ctx.cfg.b_grid;
  const auto dir = prepare_out_dir(ctx.cfg);
  std::vector<ExtinctionRecord> all;
  for (double p : ps) {
    std::vector<ExtinctionRecord> recs;
    try {
      recs = extinction_scan(p, a_grid, b_grid, controls, dim);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidSpec) throw Error(ErrorKind::Config, e.what());
      throw;
    }
    std::map<NegOutcome, int> counts;
    for (const auto& r : recs) ++counts[r.outcome];
    ctx.out << "p " << io::format_double(p) << ": extinct " << counts[NegOutcome::Extinct] << ", survived "
            << counts[NegOutcome::Survived] << ", indeterminate " << counts[NegOutcome::Indeterminate] << "\n";
    all.insert(all.end(), recs.begin(), recs.end());
  }
  io::write_text(dir / "negpower.csv", io::negpower_csv(all));
  io::write_text(dir / "falsifications.json", io::dump(io::falsification_report(all)));
  return kOk;
}

inline int cmd_expand(Context& ctx) {
  const int dim = ctx.cfg.require_dim();
  const double r_eval = ctx.cfg.r_max.value_or(default_horizon(dim));
  const auto dir = prepare_out_dir(ctx.cfg);
  json report{{"dim", dim}};
  if (ctx.cfg.beta) {
    // Explicit initial slope: expand that trajectory, which must be global on its horizon.
    const auto traj = integrate(ProblemSpec::exp_biharmonic(dim, *ctx.cfg.beta), controls_from(ctx.cfg, r_eval));
    io::write_trajectory(traj, dir / "trajectory");
    if (traj.termination().kind != TerminationKind::ReachedHorizon) {
      throw Error(ErrorKind::NotSeparatrix, "trajectory ended with " +
                                                std::string(to_string(traj.termination().kind)));
    }
    report["beta"] = io::num(*ctx.cfg.beta);
    if (dim == 3) {
      const auto rep = expansion_coefficients(traj);
      report["expansion"] = io::to_json(rep);
      io::write_text(dir / "residuals.csv", io::residual_csv(rep));
    } else if (dim >= 5) {
      report["log_limit"] = io::to_json(log_limit_check(traj));
    }
  } else if (dim == 3) {
    const auto sep = find_separatrix(3, r_eval, ctx.cfg.tol_beta, controls_from(ctx.cfg, r_eval));
    const std::vector<Trajectory> other{sep.separatrix};
    const auto rep = expansion_coefficients(sep.lo_witness, other);
    report["beta0_est"] = io::num(sep.beta0_est);
    report["expansion"] = io::to_json(rep);
    report["representation"] = io::to_json(integral_representation_check(sep.lo_witness, {1.0, 5.0, 10.0, 30.0}));
    io::write_text(dir / "residuals.csv", io::residual_csv(rep));
    io::write_trajectory(sep.lo_witness, dir / "trajectory");
    ctx.out << "alpha1 " << io::format_double(rep.alpha1.value) << "\nalpha2 " << io::format_double(rep.alpha2.value)
            << "\nalpha3 " << io::format_double(rep.alpha3.value) << "\na " << io::format_double(rep.a.value)
            << " (a = 2 alpha1: " << (rep.a_consistent ? "true" : "false") << ")\n";
  } else if (dim == 4) {
    const auto sep = find_separatrix(4, r_eval, ctx.cfg.tol_beta, controls_from(ctx.cfg, r_eval));
    double sup = 0.0;
    for (std::size_t i = 0; i < sep.separatrix.size(); ++i) {
      sup = std::max(sup, std::abs(sep.separatrix.state(i)[0] - closed_form_n4::u(sep.separatrix.radius(i))));
    }
    report["beta0_est"] = io::num(sep.beta0_est);
    report["beta0_closed_form"] = io::num(closed_form_n4::kBeta0);
    report["closed_form_sup_error"] = io::num(sup);
    io::write_trajectory(sep.separatrix, dir / "trajectory");
    ctx.out << "beta0_est " << io::format_double(sep.beta0_est) << ", closed form "
            << io::format_double(closed_form_n4::kBeta0) << "\n";
  } else if (dim >= 5) {
    // Shooting horizon 8x the evaluation radius keeps the bracket error below the log-limit gap.
    auto shoot_controls = controls_from(ctx.cfg, 8.0 * r_eval);
    shoot_controls.r_max = 8.0 * r_eval;
    const auto sep = find_separatrix(dim, shoot_controls.r_max, std::min(ctx.cfg.tol_beta, 1e-10), shoot_controls);
    auto eval_controls = controls_from(ctx.cfg, r_eval);
    eval_controls.r_max = r_eval;
    const auto traj = integrate(ProblemSpec::exp_biharmonic(dim, sep.beta0_est), eval_controls);
    const auto lim = log_limit_check(traj);
    report["beta0_est"] = io::num(sep.beta0_est);
    report["log_limit"] = io::to_json(lim);
    io::write_trajectory(traj, dir / "trajectory");
    ctx.out << "estimate " << io::format_double(lim.estimate) << ", target " << io::format_double(lim.target)
            << ", gap " << io::format_double(lim.gap) << "\n";
  } else {
    throw Error(ErrorKind::BracketFailure, "no global solutions to bracket for N <= 2");
  }
  io::write_text(dir / "expansion.json", io::dump(report));
  return kOk;
}

inline json check_json(const CheckResult& c) {
  json metrics = json::object();
  for (const auto& [k, v] : c.metrics) metrics[k] = io::num(v);
  return json{{"name", c.name}, {"pass", c.pass}, {"margin", io::num(c.margin)}, {"metrics", metrics},
              {"detail", c.detail}};
}

inline int cmd_verify(Context& ctx) {
  const auto names = ctx.cfg.checks.value_or(checks::default_suite());
  for (const auto& n : names) {
    if (!checks::known(n)) throw Error(ErrorKind::Config, "unknown check '" + n + "'");
  }
  const auto dir = prepare_out_dir(ctx.cfg);
  json entries = json::array();
  std::vector<std::string> failed;
  for (const auto& n : names) {
    const auto r = checks::run(n);
    entries.push_back(check_json(r));
    if (!r.pass) failed.push_back(n);
  }
  const json report{{"metadata", metadata()}, {"checks", entries}, {"pass", failed.empty()}};
  io::write_text(dir / "verify.json", io::dump(report));
  for (const auto& e : entries) {
    ctx.out << (e["pass"].get<bool>() ? "pass " : "FAIL ") << e["name"].get<std::string>() << "\n";
  }
  if (!failed.empty()) {
    ctx.err << "failed checks:";
    for (const auto& n : failed) ctx.err << " " << n;
    ctx.err << "\n";
    return kVerification;
  }
  return kOk;
}

/// Full command-line entry point. Flags fill the config; a --config file overrides them.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Radial polyharmonic shooting and asymptotics"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  RunConfig flags;
  struct Opts {
    CLI::Option *dim, *order, *beta, *p, *rtol, *atol, *rmax, *tol, *out, *force, *config, *checks;
  };
  std::map<CLI::App*, Opts> opts;
  int dim = 0, order = 1;
  double beta = 0, p = 0, rtol = 0, atol = 0, rmax = 0, tol = 0;
  std::string out_dir, config;
  std::vector<std::string> check_names;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"integrate", "integrate one radial initial value problem"},
      {"shoot", "bisect for the separatrix initial Laplacian"},
      {"scan-n2", "blowup scan in the plane"},
      {"negpower-scan", "extinction scans for the negative-power equation"},
      {"expand", "asymptotic expansion of the separatrix"},
      {"verify", "run named invariant checks"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    Opts o{};
    o.dim = sub->add_option("--dim", dim, "dimension N");
    o.order = sub->add_option("--order", order, "polyharmonic order m");
    o.beta = sub->add_option("--beta", beta, "initial Laplacian");
    o.p = sub->add_option("--p", p, "negative-power exponent");
    o.rtol = sub->add_option("--rtol", rtol, "relative tolerance");
    o.atol = sub->add_option("--atol", atol, "absolute tolerance");
    o.rmax = sub->add_option("--rmax", rmax, "integration horizon");
    o.tol = sub->add_option("--tol-beta,--tol", tol, "bracket width for shooting");
    o.out = sub->add_option("--out", out_dir, "output directory");
    o.force = sub->add_flag("--force", "overwrite a non-empty output directory");
    o.config = sub->add_option("--config", config, "JSON config file (overrides flags)");
    o.checks = sub->add_option("--checks", check_names, "check names for verify")->delimiter(',');
    opts[sub] = o;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  const Opts& o = opts.at(sub);
  RunConfig cfg;
  cfg.command = sub->get_name();
  if (o.dim->count()) cfg.dim = dim;
  if (o.order->count()) cfg.order = order;
  if (o.beta->count()) cfg.beta = beta;
  if (o.p->count()) cfg.p = p;
  if (o.rtol->count()) cfg.rtol = rtol;
  if (o.atol->count()) cfg.atol = atol;
  if (o.rmax->count()) cfg.r_max = rmax;
  if (o.tol->count()) cfg.tol_beta = tol;
  if (o.out->count()) cfg.out = out_dir;
  if (o.force->count()) cfg.force = true;
  if (o.checks->count()) cfg.checks = check_names;

  try {
    if (o.config->count()) {
      cfg = io::read_config(config, cfg);
      if (cfg.command != sub->get_name()) {
        throw Error(ErrorKind::Config, "config command '" + cfg.command + "' does not match '" + sub->get_name() + "'");
      }
    }
    Context ctx{cfg, out, err};
    if (cfg.command == "integrate") return cmd_integrate(ctx);
    if (cfg.command == "shoot") return cmd_shoot(ctx);
    if (cfg.command == "scan-n2") return cmd_scan_n2(ctx);
    if (cfg.command == "negpower-scan") return cmd_negpower_scan(ctx);
    if (cfg.command == "expand") return cmd_expand(ctx);
    return cmd_verify(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace polyrad::cli
