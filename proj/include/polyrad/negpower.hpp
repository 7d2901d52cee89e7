#pragma once

#include <unsupported/Eigen/Polynomials>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "polyrad/error.hpp"
#include "polyrad/integrator.hpp"
#include "polyrad/quadrature.hpp"

namespace polyrad {

enum class NegOutcome { Extinct, Survived, Indeterminate };

constexpr std::string_view to_string(NegOutcome o) {
  switch (o) {
    case NegOutcome::Extinct: return "Extinct";
    case NegOutcome::Survived: return "Survived";
    case NegOutcome::Indeterminate: return "Indeterminate";
  }
  return "Unknown";
}

inline constexpr double kSurvivalHorizon = 200.0;
inline constexpr int kDefaultNegPowerDim = 3;

struct ExtinctionRecord {
  double p = 0.0;
  double a = 0.0;
  double b = 0.0;
  NegOutcome outcome = NegOutcome::Indeterminate;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double r_max = 0.0;
  double growth_exponent = std::numeric_limits<double>::quiet_NaN();
  double min_u = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> first_negative_laplacian;
  /// Re-run at tighter tolerance and longer horizon before being reported.
  bool escalated = false;
  /// Survived with p <= 1.
  bool falsification = false;
};

inline const std::vector<double>& default_a_grid() {
  static const std::vector<double> g{0.5, 1.0, 2.0, 4.0};
  return g;
}
inline const std::vector<double>& default_b_grid() {
  static const std::vector<double> g{-2.0, -1.0, 0.0, 1.0, 2.0, 4.0};
  return g;
}

/// Least-squares slope of ln u against ln r over nodes in [R/10, R].
inline double growth_exponent(const Trajectory& traj) {
  const double big_r = traj.last_radius();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double r = traj.radius(i);
    if (r < 0.1 * big_r) continue;
    const double x = std::log(r), y = std::log(traj.state(i)[0]);
    sx += x; sy += y; sxx += x * x; sxy += x * y; n += 1;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// First radius where Δu < 0, located on the dense output.
inline std::optional<double> first_negative_laplacian(const Trajectory& traj) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (!(traj.state(i)[2] < 0.0)) continue;
    if (i == 0) return traj.radius(0);
    double lo = traj.radius(i - 1), hi = traj.radius(i);
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (traj.component(mid, 2) < 0.0 ? hi : lo) = mid;
    }
    return hi;
  }
  return std::nullopt;
}

namespace detail {

inline ExtinctionRecord record_from(const Trajectory& traj, double p, double a, double b) {
  ExtinctionRecord rec;
  rec.p = p;
  rec.a = a;
  rec.b = b;
  rec.r_max = traj.controls().r_max;
  rec.min_u = traj.state(0)[0];
  for (std::size_t i = 0; i < traj.size(); ++i) rec.min_u = std::min(rec.min_u, traj.state(i)[0]);
  rec.first_negative_laplacian = first_negative_laplacian(traj);
  switch (traj.termination().kind) {
    case TerminationKind::Extinct:
      rec.outcome = NegOutcome::Extinct;
      rec.rho = traj.termination().radius;
      break;
    case TerminationKind::ReachedHorizon:
      if (traj.last_radius() >= kSurvivalHorizon) {
        rec.outcome = NegOutcome::Survived;
        rec.growth_exponent = growth_exponent(traj);
      }
      break;
    default: break;
  }
  return rec;
}

}  // namespace detail

/// One cell of the scan. A p <= 1 survivor is re-run at 10x tighter tolerance and twice the
/// horizon before it is reported.
inline ExtinctionRecord extinction_cell(double p, double a, double b,
                                        const IntegrationControls& controls,
                                        int dim = kDefaultNegPowerDim) {
  const auto spec = ProblemSpec::neg_power(dim, p, a, b);
  ExtinctionRecord rec = detail::record_from(integrate(spec, controls), p, a, b);
  if (p <= 1.0 && rec.outcome == NegOutcome::Survived) {
    IntegrationControls again = controls.tightened(10.0);
    again.r_max = 2.0 * controls.r_max;
    rec = detail::record_from(integrate(spec, again), p, a, b);
    rec.escalated = true;
    rec.falsification = rec.outcome == NegOutcome::Survived;
  }
  return rec;
}

inline std::vector<ExtinctionRecord> extinction_scan(double p, const std::vector<double>& a_grid,
                                                     const std::vector<double>& b_grid,
                                                     IntegrationControls controls = {},
                                                     int dim = kDefaultNegPowerDim) {
  if (!(p > 0.0)) throw Error(ErrorKind::InvalidSpec, "exponent p must be > 0");
  if (controls.r_max < kSurvivalHorizon) controls.r_max = kSurvivalHorizon;
  std::vector<ExtinctionRecord> out;
  for (double a : a_grid) {
    if (!(a > 0.0)) throw Error(ErrorKind::InvalidSpec, "u(0) must be > 0");
    for (double b : b_grid) out.push_back(extinction_cell(p, a, b, controls, dim));
  }
  return out;
}

struct LaplacianImplication {
  bool pass = false;
  /// Δu strictly decreasing across all node pairs.
  bool laplacian_decreasing = false;
  /// Δu < 0 somewhere with u above threshold implies the run ends Extinct.
  bool implication_holds = false;
  std::optional<double> first_negative_laplacian;
};

inline LaplacianImplication laplacian_implication_check(const Trajectory& traj) {
  if (traj.spec().nonlinearity.is_exp()) {
    throw Error(ErrorKind::InvalidSpec, "Laplacian implication check needs the negative-power problem");
  }
  LaplacianImplication out;
  out.laplacian_decreasing = true;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (!(traj.state(i)[2] < traj.state(i - 1)[2])) out.laplacian_decreasing = false;
  }
  out.first_negative_laplacian = first_negative_laplacian(traj);
  bool negative_while_alive = false;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.state(i)[2] < 0.0 && traj.state(i)[0] > traj.controls().u_min) negative_while_alive = true;
  }
  out.implication_holds =
      !negative_while_alive || traj.termination().kind == TerminationKind::Extinct;
  out.pass = out.laplacian_decreasing && out.implication_holds;
  return out;
}

struct GrowthBounds {
  bool lower_ok = false;
  bool upper_ok = false;
  double exponent = 0.0;        // 4/(p+1)
  double slope = 0.0;           // log-log slope over the last decade
  double c_low = 0.0;           // min over the last decade of u / r^{4/(p+1)}
  double upper_ratio = 0.0;     // max over the trajectory of u / (1 + r²)
  bool pointwise_ok = false;    // u >= u(0) + Δu r²/(2N) - 1e-8 (1 + r²)
  double kappa = 0.0;           // min over the last decade of Δu / (r² u^{-p})
};

inline constexpr double kSlopeTolerance = 0.05;

/// Growth checks on a run that reached its horizon with u > 0 throughout.
inline GrowthBounds growth_bounds_check(const Trajectory& traj) {
  if (traj.spec().nonlinearity.is_exp()) {
    throw Error(ErrorKind::InvalidSpec, "growth bounds need the negative-power problem");
  }
  if (traj.termination().kind != TerminationKind::ReachedHorizon) {
    throw Error(ErrorKind::NotSurvived, "trajectory terminated with " +
                                            std::string(to_string(traj.termination().kind)));
  }
  const double p = traj.spec().nonlinearity.p;
  const int dim = traj.spec().dim;
  const double u0 = traj.spec().init[0];
  const double big_r = traj.last_radius();
  GrowthBounds g;
  g.exponent = 4.0 / (p + 1.0);
  g.slope = growth_exponent(traj);
  g.c_low = std::numeric_limits<double>::infinity();
  g.kappa = std::numeric_limits<double>::infinity();
  g.pointwise_ok = true;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double r = traj.radius(i), u = traj.state(i)[0], lap = traj.state(i)[2];
    g.upper_ratio = std::max(g.upper_ratio, u / (1.0 + r * r));
    if (u > 0.0 && u < u0 + lap * r * r / (2.0 * dim) - 1e-8 * (1.0 + r * r)) g.pointwise_ok = false;
    if (r >= 0.1 * big_r) {
      g.c_low = std::min(g.c_low, u / std::pow(r, g.exponent));
      g.kappa = std::min(g.kappa, lap / (r * r * std::pow(u, -p)));
    }
  }
  g.lower_ok = g.c_low > 0.0 && g.slope >= g.exponent - kSlopeTolerance;
  g.upper_ok = std::isfinite(g.upper_ratio) && g.slope <= 2.0 + kSlopeTolerance;
  return g;
}

struct ComparisonSample {
  double r = 0.0;
  double value = 0.0;  // r W'(r)
  double deviation = 0.0;
};

struct ComparisonLimit {
  double target = 0.0;
  double max_deviation = 0.0;
  std::vector<ComparisonSample> samples;
  /// deviation(r_{i+1}) / deviation(r_i) for consecutive samples.
  std::vector<double> ratios;
};

/// r W'(r) = -r^{2-N} ∫_0^r t^{N-1} / U(t) dt for U = u0 + α t²/(2N), against the limit
/// -2N/((N-2)α).
inline ComparisonLimit comparison_limit_check(double alpha, double u0, int dim,
                                              const std::vector<double>& r_samples) {
  if (dim < 3 || !(alpha > 0.0) || !(u0 > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "comparison limit needs N >= 3, alpha > 0, u0 > 0");
  }
  auto integrand = [&](double t) {
    return std::pow(t, dim - 1) / (u0 + alpha * t * t / (2.0 * dim));
  };
  ComparisonLimit out;
  out.target = -2.0 * dim / ((dim - 2.0) * alpha);
  for (double r : r_samples) {
    const int panels = std::max(16, static_cast<int>(std::ceil(4.0 * r)));
    double sum = 0.0;
    for (int i = 0; i < panels; ++i) {
      sum += gauss_legendre::rule(r * i / panels, r * (i + 1) / panels, integrand).first;
    }
    ComparisonSample s{r, -std::pow(r, 2.0 - dim) * sum, 0.0};
    s.deviation = std::abs(s.value - out.target);
    out.max_deviation = std::max(out.max_deviation, s.deviation);
    if (!out.samples.empty()) out.ratios.push_back(s.deviation / out.samples.back().deviation);
    out.samples.push_back(s);
  }
  return out;
}

struct PolynomialObstruction {
  /// u'''' < 0 on all of R.
  bool fourth_derivative_negative = false;
  /// u -> -inf as |x| -> inf.
  bool unbounded_below = false;
  /// Whenever the first holds so does the second: no positive entire u with u'''' < 0.
  bool consistent = false;
};

/// One-dimensional form of the negative-power obstruction on a polynomial test function
/// u(x) = sum c_k x^k (ascending coefficients).
inline PolynomialObstruction polynomial_obstruction(std::vector<double> coeffs) {
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
  std::vector<double> d4;
  for (std::size_t k = 4; k < coeffs.size(); ++k) {
    d4.push_back(coeffs[k] * k * (k - 1.0) * (k - 2.0) * (k - 3.0));
  }
  PolynomialObstruction out;
  if (!d4.empty() && d4.back() < 0.0 && (d4.size() - 1) % 2 == 0) {
    bool real_root = false;
    if (d4.size() > 1) {
      Eigen::VectorXd c = Eigen::Map<Eigen::VectorXd>(d4.data(), static_cast<Eigen::Index>(d4.size()));
      Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(c);
      for (const auto& z : solver.roots()) {
        if (std::abs(z.imag()) <= 1e-10 * (1.0 + std::abs(z.real()))) real_root = true;
      }
    }
    out.fourth_derivative_negative = !real_root;
  }
  const std::size_t deg = coeffs.size() - 1;
  out.unbounded_below = deg >= 1 && (deg % 2 == 1 || coeffs.back() < 0.0);
  out.consistent = !out.fourth_derivative_negative || out.unbounded_below;
  return out;
}

}  // namespace polyrad
