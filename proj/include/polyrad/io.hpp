#pragma once

// Persistence: CSV for tabular data (17 significant digits), JSON for structured reports.
// Needs the vendored nlohmann json header on the include path.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyrad/asymptotics.hpp"
#include "polyrad/integrator.hpp"
#include "polyrad/negpower.hpp"
#include "polyrad/shooting.hpp"

namespace polyrad::io {

using json = nlohmann::json;

// ---- scalars ------------------------------------------------------------------------------

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw Error(ErrorKind::Io, "not a number: '" + s + "'");
  return x;
}

/// Non-finite doubles become the strings "nan", "inf", "-inf".
inline json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

inline double to_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw Error(ErrorKind::Io, "expected a number, got " + j.dump());
}

inline json num_list(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

inline std::vector<double> to_double_list(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(to_double(x));
  return out;
}

inline json opt_num(const std::optional<double>& x) { return x ? num(*x) : json(nullptr); }
inline std::optional<double> to_opt_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return to_double(j);
}

// ---- enums --------------------------------------------------------------------------------

template <class E, std::size_t K>
E enum_from(const std::string& s, const E (&all)[K], const char* what) {
  for (E e : all) {
    if (to_string(e) == s) return e;
  }
  throw Error(ErrorKind::Io, std::string("unknown ") + what + " '" + s + "'");
}

inline TerminationKind termination_from(const std::string& s) {
  static constexpr TerminationKind all[] = {TerminationKind::ReachedHorizon, TerminationKind::Blowup,
                                            TerminationKind::Extinct, TerminationKind::StepUnderflow,
                                            TerminationKind::StepLimit};
  return enum_from(s, all, "termination");
}
inline Outcome outcome_from(const std::string& s) {
  static constexpr Outcome all[] = {Outcome::Blowup, Outcome::Global, Outcome::Indeterminate};
  return enum_from(s, all, "outcome");
}
inline NegOutcome neg_outcome_from(const std::string& s) {
  static constexpr NegOutcome all[] = {NegOutcome::Extinct, NegOutcome::Survived,
                                       NegOutcome::Indeterminate};
  return enum_from(s, all, "outcome");
}

// ---- core structures ----------------------------------------------------------------------

inline json to_json(const ProblemSpec& s) {
  json j;
  j["dim"] = s.dim;
  j["order"] = s.order;
  j["nonlinearity"] = s.nonlinearity.is_exp() ? "exp" : "neg_power";
  if (!s.nonlinearity.is_exp()) j["p"] = num(s.nonlinearity.p);
  j["init"] = num_list(s.init);
  return j;
}

inline ProblemSpec spec_from_json(const json& j) {
  ProblemSpec s;
  s.dim = j.at("dim").get<int>();
  s.order = j.at("order").get<int>();
  const auto kind = j.at("nonlinearity").get<std::string>();
  if (kind == "exp") {
    s.nonlinearity = Nonlinearity::exponential();
  } else if (kind == "neg_power") {
    s.nonlinearity = Nonlinearity::negative_power(to_double(j.at("p")));
  } else {
    throw Error(ErrorKind::Io, "unknown nonlinearity '" + kind + "'");
  }
  s.init = to_double_list(j.at("init"));
  return s;
}

inline json to_json(const IntegrationControls& c) {
  return json{{"rtol", num(c.rtol)},   {"atol", num(c.atol)},   {"r_max", num(c.r_max)},
              {"u_max", num(c.u_max)}, {"u_min", num(c.u_min)}, {"h_min", num(c.h_min)},
              {"max_steps", c.max_steps}, {"r0", num(c.r0)}};
}

inline IntegrationControls controls_from_json(const json& j) {
  IntegrationControls c;
  c.rtol = to_double(j.at("rtol"));
  c.atol = to_double(j.at("atol"));
  c.r_max = to_double(j.at("r_max"));
  c.u_max = to_double(j.at("u_max"));
  c.u_min = to_double(j.at("u_min"));
  c.h_min = to_double(j.at("h_min"));
  c.max_steps = j.at("max_steps").get<std::size_t>();
  c.r0 = to_double(j.at("r0"));
  return c;
}

inline json to_json(const Termination& t) {
  return json{{"kind", to_string(t.kind)},
              {"radius", num(t.radius)},
              {"fitted_radius", num(t.fitted_radius)},
              {"fitted_kappa", num(t.fitted_kappa)},
              {"near_threshold", t.near_threshold}};
}

inline Termination termination_from_json(const json& j) {
  Termination t;
  t.kind = termination_from(j.at("kind").get<std::string>());
  t.radius = to_double(j.at("radius"));
  t.fitted_radius = to_double(j.at("fitted_radius"));
  t.fitted_kappa = to_double(j.at("fitted_kappa"));
  t.near_threshold = j.at("near_threshold").get<bool>();
  return t;
}

inline json to_json(const Classification& c) {
  return json{{"kind", to_string(c.kind)},
              {"R_est", num(c.R_est)},
              {"log_R_est", num(c.log_R_est)},
              {"sigma", num(c.sigma)},
              {"sigma_limit", num(c.sigma_limit)},
              {"horizon", num(c.horizon)},
              {"first_crossing", opt_num(c.first_crossing)},
              {"continued", c.continued},
              {"termination", to_string(c.termination)},
              {"detail", c.detail}};
}

inline Classification classification_from_json(const json& j) {
  Classification c;
  c.kind = outcome_from(j.at("kind").get<std::string>());
  c.R_est = to_double(j.at("R_est"));
  c.log_R_est = to_double(j.at("log_R_est"));
  c.sigma = to_double(j.at("sigma"));
  c.sigma_limit = to_double(j.at("sigma_limit"));
  c.horizon = to_double(j.at("horizon"));
  c.first_crossing = to_opt_double(j.at("first_crossing"));
  c.continued = j.at("continued").get<bool>();
  c.termination = termination_from(j.at("termination").get<std::string>());
  c.detail = j.at("detail").get<std::string>();
  return c;
}

// ---- files --------------------------------------------------------------------------------

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, path.string() + ": " + e.what());
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorKind::Io, "missing CSV column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw Error(ErrorKind::Io, "empty CSV");
  t.header = split_csv_line(line);
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) throw Error(ErrorKind::Io, "ragged CSV row: " + line);
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---- trajectories -------------------------------------------------------------------------

inline std::vector<std::string> trajectory_columns(std::size_t state_size) {
  std::vector<std::string> cols{"r"};
  for (std::size_t k = 1; 2 * k <= state_size; ++k) {
    cols.push_back("v" + std::to_string(k));
    cols.push_back("v" + std::to_string(k) + "p");
  }
  return cols;
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out;
  const auto cols = trajectory_columns(traj.dim());
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out += format_double(traj.radius(i));
    for (double y : traj.state(i)) out += "," + format_double(y);
    out += "\n";
  }
  return out;
}

inline json trajectory_sidecar(const Trajectory& traj) {
  return json{{"spec", to_json(traj.spec())},
              {"controls", to_json(traj.controls())},
              {"termination", to_json(traj.termination())},
              {"nodes", traj.size()},
              {"columns", trajectory_columns(traj.dim())},
              {"max_error_norm", num(traj.max_error_norm())},
              {"rejected_steps", traj.rejected_steps()}};
}

/// Writes `<stem>.csv` and `<stem>.json`.
inline void write_trajectory(const Trajectory& traj, const std::filesystem::path& stem) {
  write_text(stem.string() + ".csv", trajectory_csv(traj));
  write_text(stem.string() + ".json", dump(trajectory_sidecar(traj)));
}

/// Node data re-read from disk.
struct TrajectoryTable {
  ProblemSpec spec;
  IntegrationControls controls;
  Termination termination;
  std::vector<StateVector> nodes;

  const StateVector& back() const { return nodes.back(); }
};

inline TrajectoryTable read_trajectory(const std::filesystem::path& stem) {
  TrajectoryTable t;
  const json side = read_json(stem.string() + ".json");
  t.spec = spec_from_json(side.at("spec"));
  t.controls = controls_from_json(side.at("controls"));
  t.termination = termination_from_json(side.at("termination"));
  const CsvTable csv = parse_csv(read_text(stem.string() + ".csv"));
  if (csv.header != trajectory_columns(t.spec.state_size())) {
    throw Error(ErrorKind::Io, "trajectory columns do not match the problem");
  }
  for (const auto& row : csv.rows) {
    StateVector s;
    s.r = parse_double(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) s.y.push_back(parse_double(row[c]));
    t.nodes.push_back(std::move(s));
  }
  if (t.nodes.size() != side.at("nodes").get<std::size_t>()) {
    throw Error(ErrorKind::Io, "node count does not match the sidecar");
  }
  return t;
}

// ---- scans --------------------------------------------------------------------------------

struct ScanRow {
  double beta = 0.0;
  Outcome kind = Outcome::Indeterminate;
  double R_est = 0.0;
  double sigma = 0.0;
  double log_R_est = 0.0;
};

/// `beta` is Δu(0), the second init entry.
inline std::string scan_csv(const ScanReport& rep) {
  std::string out = "beta,kind,R_est,sigma,log_R_est\n";
  for (const auto& e : rep.entries) {
    const auto& c = e.classification;
    out += format_double(e.init.size() > 1 ? e.init[1] : 0.0) + "," + std::string(to_string(c.kind)) +
           "," + format_double(c.R_est) + "," + format_double(c.sigma) + "," +
           format_double(c.log_R_est) + "\n";
  }
  return out;
}

inline std::vector<ScanRow> parse_scan_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const std::size_t ib = t.column("beta"), ik = t.column("kind"), ir = t.column("R_est"),
                    is = t.column("sigma"), il = t.column("log_R_est");
  std::vector<ScanRow> out;
  for (const auto& row : t.rows) {
    out.push_back({parse_double(row[ib]), outcome_from(row[ik]), parse_double(row[ir]),
                   parse_double(row[is]), parse_double(row[il])});
  }
  return out;
}

inline json to_json(const ScanReport& rep) {
  json entries = json::array();
  for (const auto& e : rep.entries) {
    entries.push_back({{"init", num_list(e.init)}, {"classification", to_json(e.classification)}});
  }
  return json{{"entries", entries},
              {"all_blowup", rep.all_blowup()},
              {"falsifications", rep.falsifications},
              {"monotonicity_violations", rep.monotonicity_violations}};
}

inline ScanReport scan_from_json(const json& j) {
  ScanReport rep;
  for (const auto& e : j.at("entries")) {
    rep.entries.push_back({to_double_list(e.at("init")), classification_from_json(e.at("classification"))});
  }
  rep.falsifications = j.at("falsifications").get<std::vector<std::size_t>>();
  rep.monotonicity_violations = j.at("monotonicity_violations").get<std::vector<std::size_t>>();
  return rep;
}

// ---- negative power -----------------------------------------------------------------------

inline std::string negpower_csv(const std::vector<ExtinctionRecord>& recs) {
  std::string out = "p,a,b,outcome,rho,min_u,first_negative_laplacian_r\n";
  for (const auto& r : recs) {
    out += format_double(r.p) + "," + format_double(r.a) + "," + format_double(r.b) + "," +
           std::string(to_string(r.outcome)) + "," + format_double(r.rho) + "," +
           format_double(r.min_u) + "," +
           (r.first_negative_laplacian ? format_double(*r.first_negative_laplacian) : "") + "\n";
  }
  return out;
}

/// Reads back the CSV columns; fields absent from the CSV keep their defaults.
inline std::vector<ExtinctionRecord> parse_negpower_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  std::vector<ExtinctionRecord> out;
  for (const auto& row : t.rows) {
    ExtinctionRecord r;
    r.p = parse_double(row[t.column("p")]);
    r.a = parse_double(row[t.column("a")]);
    r.b = parse_double(row[t.column("b")]);
    r.outcome = neg_outcome_from(row[t.column("outcome")]);
    r.rho = parse_double(row[t.column("rho")]);
    r.min_u = parse_double(row[t.column("min_u")]);
    const auto& fn = row[t.column("first_negative_laplacian_r")];
    if (!fn.empty()) r.first_negative_laplacian = parse_double(fn);
    out.push_back(r);
  }
  return out;
}

inline json to_json(const ExtinctionRecord& r) {
  return json{{"p", num(r.p)},
              {"a", num(r.a)},
              {"b", num(r.b)},
              {"outcome", to_string(r.outcome)},
              {"rho", num(r.rho)},
              {"r_max", num(r.r_max)},
              {"growth_exponent", num(r.growth_exponent)},
              {"min_u", num(r.min_u)},
              {"first_negative_laplacian_r", opt_num(r.first_negative_laplacian)},
              {"escalated", r.escalated},
              {"falsification", r.falsification}};
}

inline ExtinctionRecord extinction_from_json(const json& j) {
  ExtinctionRecord r;
  r.p = to_double(j.at("p"));
  r.a = to_double(j.at("a"));
  r.b = to_double(j.at("b"));
  r.outcome = neg_outcome_from(j.at("outcome").get<std::string>());
  r.rho = to_double(j.at("rho"));
  r.r_max = to_double(j.at("r_max"));
  r.growth_exponent = to_double(j.at("growth_exponent"));
  r.min_u = to_double(j.at("min_u"));
  r.first_negative_laplacian = to_opt_double(j.at("first_negative_laplacian_r"));
  r.escalated = j.at("escalated").get<bool>();
  r.falsification = j.at("falsification").get<bool>();
  return r;
}

/// Falsification candidates (p <= 1 survivors after escalation) plus every escalated cell.
inline json falsification_report(const std::vector<ExtinctionRecord>& recs) {
  json cand = json::array(), esc = json::array();
  for (const auto& r : recs) {
    if (r.falsification) cand.push_back(to_json(r));
    if (r.escalated) esc.push_back(to_json(r));
  }
  return json{{"candidates", cand}, {"escalated", esc}, {"count", cand.size()}};
}

// ---- shooting and expansion ---------------------------------------------------------------

inline json to_json(const BracketRecord& b) {
  return json{{"beta_lo", num(b.beta_lo)},
              {"beta_hi", num(b.beta_hi)},
              {"sigma", num(b.sigma)},
              {"sigma_limit", num(b.sigma_limit)}};
}

inline json to_json(const SeparatrixResult& r) {
  json hist = json::array();
  for (const auto& b : r.history) hist.push_back(to_json(b));
  return json{{"dim", r.dim},
              {"r_max", num(r.r_max)},
              {"tol_beta", num(r.tol_beta)},
              {"beta_lo", num(r.beta_lo)},
              {"beta_hi", num(r.beta_hi)},
              {"beta0_est", num(r.beta0_est)},
              {"lo_class", to_json(r.lo_class)},
              {"hi_class", to_json(r.hi_class)},
              {"history", hist},
              {"shots", r.shots}};
}

/// Separatrix summary without trajectories.
inline SeparatrixResult separatrix_from_json(const json& j) {
  SeparatrixResult r;
  r.dim = j.at("dim").get<int>();
  r.r_max = to_double(j.at("r_max"));
  r.tol_beta = to_double(j.at("tol_beta"));
  r.beta_lo = to_double(j.at("beta_lo"));
  r.beta_hi = to_double(j.at("beta_hi"));
  r.beta0_est = to_double(j.at("beta0_est"));
  r.lo_class = classification_from_json(j.at("lo_class"));
  r.hi_class = classification_from_json(j.at("hi_class"));
  for (const auto& b : j.at("history")) {
    r.history.push_back({to_double(b.at("beta_lo")), to_double(b.at("beta_hi")),
                         to_double(b.at("sigma")), to_double(b.at("sigma_limit"))});
  }
  r.shots = j.at("shots").get<int>();
  return r;
}

inline json to_json(const Estimate& e) { return json{{"value", num(e.value)}, {"error", num(e.error)}}; }
inline Estimate estimate_from_json(const json& j) {
  return {to_double(j.at("value")), to_double(j.at("error"))};
}

inline json to_json(const ExpansionReport& rep) {
  json res = json::array();
  for (const auto& s : rep.residuals) {
    res.push_back({{"r", num(s.r)}, {"u", num(s.u)}, {"fit", num(s.fit)},
                   {"direct", num(s.direct)}, {"stable", num(s.stable)}});
  }
  return json{{"alpha1", to_json(rep.alpha1)},
              {"alpha2", to_json(rep.alpha2)},
              {"alpha3", to_json(rep.alpha3)},
              {"a", to_json(rep.a)},
              {"a_consistent", rep.a_consistent},
              {"residuals", res},
              {"decay_ratio", num(rep.decay_ratio)},
              {"bracket_spread", num(rep.bracket_spread)}};
}

inline ExpansionReport expansion_from_json(const json& j) {
  ExpansionReport rep;
  rep.alpha1 = estimate_from_json(j.at("alpha1"));
  rep.alpha2 = estimate_from_json(j.at("alpha2"));
  rep.alpha3 = estimate_from_json(j.at("alpha3"));
  rep.a = estimate_from_json(j.at("a"));
  rep.a_consistent = j.at("a_consistent").get<bool>();
  for (const auto& s : j.at("residuals")) {
    ResidualSample r;
    r.r = to_double(s.at("r"));
    r.u = to_double(s.at("u"));
    r.fit = to_double(s.at("fit"));
    r.direct = to_double(s.at("direct"));
    r.stable = to_double(s.at("stable"));
    rep.residuals.push_back(r);
  }
  rep.decay_ratio = to_double(j.at("decay_ratio"));
  rep.bracket_spread = to_double(j.at("bracket_spread"));
  return rep;
}

/// `residual` is the cancellation-free tail form.
inline std::string residual_csv(const ExpansionReport& rep) {
  std::string out = "r,u,fit,residual\n";
  for (const auto& s : rep.residuals) {
    out += format_double(s.r) + "," + format_double(s.u) + "," + format_double(s.fit) + "," +
           format_double(s.stable) + "\n";
  }
  return out;
}

inline json to_json(const LogLimitResult& r) {
  json samples = json::array();
  for (const auto& [rr, v] : r.samples) samples.push_back({num(rr), num(v)});
  return json{{"estimate", num(r.estimate)}, {"target", num(r.target)},
              {"gap", num(r.gap)},           {"richardson", num(r.richardson)},
              {"samples", samples},          {"decay", num(r.decay)},
              {"frequency", num(r.frequency)}};
}

inline LogLimitResult log_limit_from_json(const json& j) {
  LogLimitResult r;
  r.estimate = to_double(j.at("estimate"));
  r.target = to_double(j.at("target"));
  r.gap = to_double(j.at("gap"));
  r.richardson = to_double(j.at("richardson"));
  for (const auto& s : j.at("samples")) r.samples.emplace_back(to_double(s.at(0)), to_double(s.at(1)));
  r.decay = to_double(j.at("decay"));
  r.frequency = to_double(j.at("frequency"));
  return r;
}

inline json to_json(const RepresentationCheck& c) {
  json samples = json::array();
  for (const auto& s : c.samples) {
    samples.push_back({{"r", num(s.r)}, {"u", num(s.u)}, {"rhs", num(s.rhs)},
                       {"error_bound", num(s.error_bound)}, {"v", num(s.v)}, {"v_rhs", num(s.v_rhs)}});
  }
  return json{{"max_deviation", num(c.max_deviation)},
              {"max_v_deviation", num(c.max_v_deviation)},
              {"samples", samples}};
}

}  // namespace polyrad::io
