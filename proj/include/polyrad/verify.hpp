#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "polyrad/asymptotics.hpp"
#include "polyrad/negpower.hpp"
#include "polyrad/quadrature.hpp"
#include "polyrad/shooting.hpp"

namespace polyrad {

struct CheckResult {
  std::string name;
  bool pass = false;
  /// Signed distance to the threshold of the tightest condition; negative on failure.
  double margin = 0.0;
  std::vector<std::pair<std::string, double>> metrics;
  std::string detail;

  double metric(const std::string& key) const {
    for (const auto& [k, v] : metrics) {
      if (k == key) return v;
    }
    throw Error(ErrorKind::OutOfRange, "no metric '" + key + "' in check " + name);
  }
};

namespace checks {

inline CheckResult named(std::string name) {
  CheckResult c;
  c.name = std::move(name);
  return c;
}

inline IntegrationControls horizon(double r_max) {
  IntegrationControls c;
  c.r_max = r_max;
  return c;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
  return out;
}

/// Order-2 init lattice {u(0)} x levels^3.
inline std::vector<std::vector<double>> order_two_lattice(const std::vector<double>& levels,
                                                          double u0 = 0.0) {
  std::vector<std::vector<double>> out;
  for (double a : levels)
    for (double b : levels)
      for (double c : levels) out.push_back({u0, a, b, c});
  return out;
}

/// The N = 4 closed-form separatrix sampled on a geometric grid out to r_max.
inline Trajectory closed_form_n4_trajectory(double r_max, int per_decade = 400) {
  std::vector<double> radii{0.0};
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double r = 1e-3; r < r_max; r *= step) radii.push_back(r);
  radii.push_back(r_max);
  namespace cf = closed_form_n4;
  return Trajectory::from_function(
      ProblemSpec::exp_biharmonic(4, cf::kBeta0), radii, [](double r) { return cf::state(r).y; },
      [](double r) {
        const double dlap = cf::laplacian_derivative(r);
        return std::vector<double>{cf::derivative(r, 1), cf::derivative(r, 2), dlap,
                                   std::exp(cf::u(r)) - 3.0 * dlap / std::max(r, 1e-300)};
      });
}

inline double gap_after_shooting(int dim, double r_eval) {
  const auto s = find_separatrix(dim, 8.0 * r_eval, 1e-10);
  return log_limit_check(integrate(ProblemSpec::exp_biharmonic(dim, s.beta0_est), horizon(r_eval))).gap;
}

inline CheckResult n4_anchor() {
  auto c = named("n4_anchor");
  const auto res = find_separatrix(4, 40.0, 1e-6);
  const double err = std::abs(res.beta0_est - closed_form_n4::kBeta0);
  double sup = 0.0;
  for (std::size_t i = 0; i < res.separatrix.size() && res.separatrix.radius(i) <= 20.0; ++i) {
    sup = std::max(sup, std::abs(res.separatrix.state(i)[0] - closed_form_n4::u(res.separatrix.radius(i))));
  }
  c.metrics = {{"beta0_est", res.beta0_est}, {"beta_error", err}, {"sup_error", sup}, {"shots", res.shots}};
  c.margin = std::min(1e-4 - err, 1e-5 - sup);
  c.pass = c.margin >= 0.0;
  return c;
}

inline CheckResult log_limit_n5() {
  auto c = named("log_limit_n5");
  const auto s = find_separatrix(5, 320.0, 1e-10);
  const auto lim = log_limit_check(integrate(ProblemSpec::exp_biharmonic(5, s.beta0_est), horizon(40.0)));
  const double g80 = gap_after_shooting(5, 80.0);
  c.metrics = {{"estimate", lim.estimate}, {"target", lim.target}, {"gap_r40", lim.gap}, {"gap_r80", g80}};
  c.margin = std::min(5e-2 - lim.gap, lim.gap - g80);
  c.pass = c.margin > 0.0;
  return c;
}

inline CheckResult expansion_n3() {
  auto c = named("expansion_n3");
  const auto sep = find_separatrix(3, 100.0, 1e-8);
  const std::vector<Trajectory> other{sep.separatrix};
  const auto rep = expansion_coefficients(sep.lo_witness, other);
  auto stable_at = [&](double r) {
    for (const auto& s : rep.residuals) {
      if (s.r == r) return s.stable;
    }
    throw Error(ErrorKind::OutOfRange, "missing residual radius");
  };
  const double q1 = stable_at(60.0) / stable_at(40.0), q2 = stable_at(80.0) / stable_at(60.0);
  const double gap = std::abs(rep.a.value - 2.0 * rep.alpha1.value);
  const double bars = rep.a.error + 2.0 * rep.alpha1.error;
  c.metrics = {{"alpha1", rep.alpha1.value}, {"alpha2", rep.alpha2.value}, {"alpha3", rep.alpha3.value},
               {"a", rep.a.value},           {"a_gap", gap},                {"a_error_bars", bars},
               {"ratio_40_60", q1},          {"ratio_60_80", q2}};
  const bool signs = rep.alpha1.value < 0 && rep.alpha2.value > 0 && rep.alpha3.value < 0;
  c.margin = std::min({bars - gap, 0.5 - q1, 0.5 - q2});
  c.pass = signs && rep.a_consistent && c.margin >= 0.0;
  if (!signs) c.detail = "coefficient signs wrong";
  return c;
}

inline CheckResult representation_n3() {
  auto c = named("representation_n3");
  const auto sep = find_separatrix(3, 100.0, 1e-8);
  const auto rep = integral_representation_check(sep.lo_witness, {1.0, 5.0, 10.0, 30.0});
  c.metrics = {{"max_deviation", rep.max_deviation}, {"max_v_deviation", rep.max_v_deviation}};
  c.margin = std::min(1e-5 - rep.max_deviation, 1e-6 - rep.max_v_deviation);
  c.pass = c.margin >= 0.0;
  return c;
}

/// Exponential runs over m in {1, 2}, N in {2..5}: a sign change of the top-level component
/// must be followed by a finite-radius blowup.
inline CheckResult sign_crossing() {
  auto c = named("sign_crossing");
  std::vector<ProblemSpec> specs;
  for (int n = 2; n <= 5; ++n) {
    for (double beta : {-4.0, -3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 1.0}) {
      specs.push_back(ProblemSpec::exp_biharmonic(n, beta));
    }
    for (const auto& init : order_two_lattice({-1.0, 1.0})) {
      specs.push_back(ProblemSpec{n, 2, Nonlinearity::exponential(), init});
    }
  }
  int crossings = 0, counterexamples = 0;
  for (const auto& spec : specs) {
    Trajectory traj;
    const auto cls = classify(spec, horizon(40.0), {}, &traj);
    const bool crossed = sign_crossing_check(traj).has_value() || cls.first_crossing.has_value();
    if (!crossed) continue;
    ++crossings;
    if (!cls.finite_blowup()) {
      ++counterexamples;
      c.detail += "N=" + std::to_string(spec.dim) + " m=" + std::to_string(spec.order) + " ";
    }
  }
  c.metrics = {{"trajectories", double(specs.size())}, {"crossings", double(crossings)},
               {"counterexamples", double(counterexamples)}};
  c.margin = 0.0 - double(counterexamples);
  c.pass = counterexamples == 0 && specs.size() >= 50;
  return c;
}

inline CheckResult n2_scan() {
  auto c = named("n2_scan");
  const auto betas = linspace(-100.0, 10.0, 33);
  const auto scan = scan_n2(betas, horizon(40.0));
  const auto lattices = scan_inits(2, order_two_lattice({-5.0, -1.0, 1.0}), horizon(40.0));
  double max_log_r = 0.0;
  for (const auto* rep : {&scan, &lattices}) {
    for (const auto& e : rep->entries) max_log_r = std::max(max_log_r, e.classification.log_R_est);
  }
  const auto failures = scan.falsifications.size() + lattices.falsifications.size();
  c.metrics = {{"betas", double(betas.size())},
               {"lattices", double(lattices.entries.size())},
               {"not_blowup", double(failures)},
               {"monotonicity_violations", double(scan.monotonicity_violations.size())},
               {"max_log_R", max_log_r}};
  c.margin = 0.0 - double(failures + scan.monotonicity_violations.size());
  c.pass = failures == 0 && scan.monotonicity_violations.empty();
  return c;
}

inline CheckResult lower_bound() {
  auto c = named("lower_bound");
  double worst = std::numeric_limits<double>::infinity();
  int count = 0;
  for (int n = 2; n <= 5; ++n) {
    for (double beta : {-4.0, -2.0, -1.0, -0.5, 0.0, 1.0, 2.0}) {
      worst = std::min(worst, lower_bound_margin(integrate(ProblemSpec::exp_biharmonic(n, beta), horizon(40.0))));
      ++count;
    }
  }
  c.metrics = {{"trajectories", double(count)}, {"worst_margin", worst}};
  c.margin = worst;
  c.pass = worst >= 0.0;
  return c;
}

inline CheckResult upper_bound() {
  auto c = named("upper_bound");
  double worst = std::numeric_limits<double>::infinity();
  for (double beta : {-1.8, -2.5, -4.0}) {
    worst = std::min(worst, upper_bound_margin(integrate(ProblemSpec::exp_biharmonic(4, beta), horizon(40.0)),
                                               closed_form_n4::kBeta0));
  }
  c.metrics = {{"worst_margin", worst}};
  c.margin = worst;
  c.pass = worst >= 0.0;
  return c;
}

inline CheckResult scaling() {
  auto c = named("scaling");
  const double e3 = scaling_error(3, -2.0, 2.0, 40.0);
  const double e4 = scaling_error(4, closed_form_n4::kBeta0, 2.0, 40.0);
  const double e2 = scaling_error(2, -1.0, 2.0, 40.0);
  const double worst = std::max({e2, e3, e4});
  c.metrics = {{"error_n2", e2}, {"error_n3", e3}, {"error_n4", e4}};
  c.margin = 1e-6 - worst;
  c.pass = c.margin >= 0.0;
  return c;
}

inline CheckResult supersolution() {
  auto c = named("supersolution");
  std::vector<double> grid;
  for (int i = 1; i <= 2000; ++i) grid.push_back(0.01 * i);
  const auto probe = check_supersolution(0.1, 0.0, grid);
  const double b = std::log(probe.max_psi);
  const auto tight = check_supersolution(0.1, b, grid);
  const auto loose = check_supersolution(0.1, b - 1.0, grid);
  c.metrics = {{"max_psi", probe.max_psi}, {"argmax", probe.argmax}, {"b", b},
               {"worst_margin", tight.worst_margin}, {"worst_margin_b_minus_1", loose.worst_margin}};
  c.margin = tight.worst_margin + 1e-10;
  c.pass = tight.pass && !loose.pass && tight.worst_margin >= -1e-10;
  return c;
}

inline CheckResult extinction() {
  auto c = named("extinction");
  int survived_sublinear = 0, extinct = 0, falsifications = 0;
  for (double p : {0.25, 0.5, 0.75, 1.0}) {
    for (const auto& r : extinction_scan(p, default_a_grid(), default_b_grid())) {
      if (r.outcome == NegOutcome::Survived) ++survived_sublinear;
      if (r.outcome == NegOutcome::Extinct) ++extinct;
      if (r.falsification) ++falsifications;
    }
  }
  int survivors = 0;
  double best_exponent = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : extinction_scan(2.0, default_a_grid(), default_b_grid())) {
    if (r.outcome != NegOutcome::Survived) continue;
    ++survivors;
    if (r.growth_exponent >= 4.0 / 3.0 && r.growth_exponent <= 2.2) best_exponent = r.growth_exponent;
  }
  c.metrics = {{"sublinear_extinct", double(extinct)},
               {"sublinear_survived", double(survived_sublinear)},
               {"falsification_candidates", double(falsifications)},
               {"p2_survivors", double(survivors)},
               {"p2_growth_exponent", best_exponent}};
  c.margin = 0.0 - double(survived_sublinear);
  c.pass = survived_sublinear == 0 && std::isfinite(best_exponent);
  return c;
}

inline CheckResult laplacian_implication() {
  auto c = named("laplacian_implication");
  int count = 0, failures = 0;
  for (double p : {0.5, 1.0, 2.0}) {
    for (double a : default_a_grid()) {
      for (double b : default_b_grid()) {
        const auto traj = integrate(ProblemSpec::neg_power(kDefaultNegPowerDim, p, a, b), horizon(kSurvivalHorizon));
        ++count;
        if (!laplacian_implication_check(traj).pass) ++failures;
      }
    }
  }
  c.metrics = {{"trajectories", double(count)}, {"failures", double(failures)}};
  c.margin = 0.0 - double(failures);
  c.pass = failures == 0;
  return c;
}

inline CheckResult growth_bounds() {
  auto c = named("growth_bounds");
  const auto traj = integrate(ProblemSpec::neg_power(kDefaultNegPowerDim, 2.0, 1.0, 4.0), horizon(kSurvivalHorizon));
  const auto g = growth_bounds_check(traj);
  c.metrics = {{"slope", g.slope}, {"c_low", g.c_low}, {"upper_ratio", g.upper_ratio}, {"kappa", g.kappa}};
  c.margin = std::min(g.slope - g.exponent, 2.0 + kSlopeTolerance - g.slope);
  c.pass = g.lower_ok && g.upper_ok && g.pointwise_ok && g.kappa > 0.0;
  return c;
}

inline CheckResult comparison_limit() {
  auto c = named("comparison_limit");
  const auto res = comparison_limit_check(6.0, 1.0, 3, {1e3, 2e3});
  const double dev = res.samples[0].deviation, ratio = res.ratios[0];
  c.metrics = {{"value_r1000", res.samples[0].value}, {"target", res.target}, {"deviation_r1000", dev},
               {"ratio", ratio}};
  c.margin = std::min(1e-2 - dev, 0.1 - std::abs(ratio - 0.5));
  c.pass = c.margin >= 0.0;
  return c;
}

/// ∫_0^∞ t³ (1 + c t²)^{-4} dt = B(2,2)/(2c²) on the closed form, and Gamma moments of u = -r.
inline CheckResult quadrature_oracle() {
  auto c = named("quadrature_oracle");
  const double scale = closed_form_n4::kScale;
  const double exact = std::beta(2.0, 2.0) / (2.0 * scale * scale);
  const double beta_value = quadrature_weighted(closed_form_n4_trajectory(1e4), 3).value;
  std::vector<double> radii;
  for (int i = 0; i <= 600; ++i) radii.push_back(0.1 * i);
  const auto linear = Trajectory::from_function(
      ProblemSpec::exp_biharmonic(3, 0.0), radii,
      [](double r) { return std::vector<double>{-r, -1.0, 0.0, 0.0}; },
      [](double) { return std::vector<double>{-1.0, 0.0, 0.0, 0.0}; });
  const auto rep = expansion_coefficients(linear, {}, {});
  const double gamma_err = std::max({std::abs(rep.alpha1.value + 1.0), std::abs(rep.alpha2.value - 3.0),
                                     std::abs(rep.alpha3.value + 4.0)});
  c.metrics = {{"beta_integral", beta_value}, {"beta_exact", exact}, {"alpha1", rep.alpha1.value},
               {"alpha2", rep.alpha2.value}, {"alpha3", rep.alpha3.value}};
  c.margin = std::min(1e-8 - std::abs(beta_value - exact), 1e-8 - gamma_err);
  c.pass = c.margin >= 0.0;
  return c;
}

using Check = std::function<CheckResult()>;

/// Named checks in report order. Mutable so callers can register their own.
inline std::vector<std::pair<std::string, Check>>& registry() {
  static std::vector<std::pair<std::string, Check>> all{
      {"n4_anchor", n4_anchor},
      {"log_limit_n5", log_limit_n5},
      {"expansion_n3", expansion_n3},
      {"representation_n3", representation_n3},
      {"sign_crossing", sign_crossing},
      {"n2_scan", n2_scan},
      {"lower_bound", lower_bound},
      {"upper_bound", upper_bound},
      {"scaling", scaling},
      {"supersolution", supersolution},
      {"extinction", extinction},
      {"laplacian_implication", laplacian_implication},
      {"growth_bounds", growth_bounds},
      {"comparison_limit", comparison_limit},
      {"quadrature_oracle", quadrature_oracle},
  };
  return all;
}

inline std::vector<std::string> default_suite() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

inline bool known(const std::string& name) {
  return std::any_of(registry().begin(), registry().end(), [&](const auto& e) { return e.first == name; });
}

/// Runs one check; numerical exceptions become a failed result.
inline CheckResult run(const std::string& name) {
  for (const auto& [n, fn] : registry()) {
    if (n != name) continue;
    try {
      return fn();
    } catch (const Error& e) {
      auto c = named(name);
      c.margin = -std::numeric_limits<double>::infinity();
      c.detail = e.what();
      return c;
    }
  }
  throw Error(ErrorKind::Config, "unknown check '" + name + "'");
}

}  // namespace checks
}  // namespace polyrad
