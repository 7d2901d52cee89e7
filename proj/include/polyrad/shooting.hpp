#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polyrad/error.hpp"
#include "polyrad/integrator.hpp"

namespace polyrad {

enum class Outcome { Blowup, Global, Indeterminate };

constexpr std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Blowup: return "Blowup";
    case Outcome::Global: return "Global";
    case Outcome::Indeterminate: return "Indeterminate";
  }
  return "Unknown";
}

struct Classification {
  Outcome kind = Outcome::Indeterminate;
  /// Blowup radius. Can be +inf when only its logarithm is representable.
  double R_est = std::numeric_limits<double>::quiet_NaN();
  double log_R_est = std::numeric_limits<double>::quiet_NaN();
  /// v_{2m} at the last horizon (Global).
  double sigma = std::numeric_limits<double>::quiet_NaN();
  /// Tail-corrected estimate of lim v_{2m} (m = 1, N >= 3).
  double sigma_limit = std::numeric_limits<double>::quiet_NaN();
  double horizon = 0.0;
  std::optional<double> first_crossing;
  /// R_est comes from the exact polyharmonic continuation after e^u underflowed.
  bool continued = false;
  TerminationKind termination = TerminationKind::ReachedHorizon;
  std::string detail;

  bool finite_blowup() const { return kind == Outcome::Blowup && std::isfinite(log_R_est); }
};

struct ClassifyOptions {
  bool extend = true;
  double extension_factor = 10.0;
  double horizon_cap = 1e12;
};

/// Below e^u is exactly zero in double precision.
inline constexpr double kUnderflowLevel = -746.0;

inline double default_horizon(int dim) { return dim == 3 ? 100.0 : 40.0; }

/// First radius with v_{2m} >= 0 (0 when the initial value is already >= 0), located on the
/// dense output.
inline std::optional<double> sign_crossing_check(const Trajectory& traj) {
  if (!traj.spec().nonlinearity.is_exp()) {
    throw Error(ErrorKind::InvalidSpec, "sign crossing check needs the exponential problem");
  }
  const std::size_t comp = 2 * (traj.spec().levels() - 1);
  if (traj.spec().init.back() >= 0.0) return 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.state(i)[comp] < 0.0) continue;
    if (i == 0) return traj.radius(0);
    double lo = traj.radius(i - 1), hi = traj.radius(i);
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (traj.component(mid, comp) >= 0.0 ? hi : lo) = mid;
    }
    return hi;
  }
  return std::nullopt;
}

/// Estimate of lim_{r→∞} Δu for m = 1 from the state at the last node:
/// v(R) + M R^{2-N}/(N-2) + e^{u(R)} R²/((N-2)(q-2)), M = R^{N-1} v'(R), q = -R u'(R).
/// Returns +inf when the tail model does not apply (N <= 2 or q <= 2).
inline double sigma_limit(int dim, const StateVector& s) {
  const double big_r = s.r;
  const double q = -big_r * s.dv(1);
  if (dim <= 2 || !(q > 2.0)) return std::numeric_limits<double>::infinity();
  const double flux_term = big_r * s.dv(2) / (dim - 2.0);  // M R^{2-N}/(N-2)
  const double source_term = std::exp(s.u()) * big_r * big_r / ((dim - 2.0) * (q - 2.0));
  return s.v(2) + flux_term + source_term;
}

inline double sigma_limit(const Trajectory& traj) {
  return sigma_limit(traj.spec().dim, traj.back());
}

namespace detail {

/// Radial polyharmonic functions in R² written as sum_j rho^{2j} (a_j + b_j ln rho).
struct LogPolynomial {
  std::vector<double> a, b;

  LogPolynomial laplacian() const {
    LogPolynomial out{std::vector<double>(a.size(), 0.0), std::vector<double>(a.size(), 0.0)};
    for (std::size_t j = 1; j < a.size(); ++j) {
      const double jj = static_cast<double>(j);
      out.a[j - 1] += 4.0 * jj * jj * a[j] + 4.0 * jj * b[j];
      out.b[j - 1] += 4.0 * jj * jj * b[j];
    }
    return out;
  }
  double value_at_one() const {
    double s = 0.0;
    for (double x : a) s += x;
    return s;
  }
  double slope_at_one() const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += 2.0 * j * a[j] + b[j];
    return s;
  }
  double at_log(double t) const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::exp(2.0 * j * t) * (a[j] + b[j] * t);
    return s;
  }
};

/// Once e^u has underflowed in N = 2 the computed problem is exactly Δ^{2m}u = 0. Fits the
/// polyharmonic continuation to the state at the last node and returns ln of the first radius
/// where u climbs back to kUnderflowLevel, or NaN when it never does.
inline double continued_log_radius(const Trajectory& traj) {
  const std::size_t levels = traj.spec().levels();
  const std::size_t n = 2 * levels;
  const auto s = traj.back();
  const double big_r = s.r;
  Eigen::MatrixXd mat(n, n);
  Eigen::VectorXd rhs(n);
  for (std::size_t col = 0; col < n; ++col) {
    LogPolynomial f{std::vector<double>(levels, 0.0), std::vector<double>(levels, 0.0)};
    (col < levels ? f.a[col] : f.b[col - levels]) = 1.0;
    for (std::size_t k = 1; k <= levels; ++k) {
      mat(2 * (k - 1), col) = f.value_at_one();
      mat(2 * (k - 1) + 1, col) = f.slope_at_one();
      f = f.laplacian();
    }
  }
  for (std::size_t k = 1; k <= levels; ++k) {
    const double scale = std::pow(big_r, 2.0 * (k - 1));
    rhs(2 * (k - 1)) = scale * s.v(k);
    rhs(2 * (k - 1) + 1) = scale * big_r * s.dv(k);
  }
  const Eigen::VectorXd coef = mat.fullPivLu().solve(rhs);
  LogPolynomial u{std::vector<double>(levels), std::vector<double>(levels)};
  for (std::size_t j = 0; j < levels; ++j) {
    u.a[j] = coef(j);
    u.b[j] = coef(levels + j);
  }
  const std::size_t top = levels - 1;
  const double direct_limit = 300.0 / (2.0 * top);
  const double dt = 1e-2;
  for (double t = 0.0; t < direct_limit; t += dt) {
    if (u.at_log(t + dt) >= kUnderflowLevel) {
      double lo = t, hi = t + dt;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (u.at_log(mid) >= kUnderflowLevel ? hi : lo) = mid;
      }
      return std::log(big_r) + hi;
    }
  }
  // Beyond direct_limit only the top pair matters: u ~ rho^{4m-2}(a + b ln rho).
  if (!(u.b[top] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double t_star = -u.a[top] / u.b[top];
  if (!(t_star >= direct_limit)) return std::numeric_limits<double>::quiet_NaN();
  return std::log(big_r) + t_star;
}

inline Classification blowup_from(const Trajectory& traj, double horizon) {
  Classification c;
  c.kind = Outcome::Blowup;
  c.termination = TerminationKind::Blowup;
  c.R_est = traj.termination().radius;
  c.log_R_est = std::log(c.R_est);
  c.horizon = horizon;
  c.first_crossing = sign_crossing_check(traj);
  return c;
}

}  // namespace detail

/// Trichotomy classification of one exponential shot. The horizon is extended by
/// `extension_factor` while the trajectory is on the blowup side without an event yet.
/// Global is assigned for m = 1 when the tail-corrected limit of Δu is negative, and for
/// m >= 2 (N >= 3) when v_{2m} never crossed zero by the horizon.
inline Classification classify(const ProblemSpec& spec, const IntegrationControls& controls,
                               const ClassifyOptions& opt = {}, Trajectory* out = nullptr) {
  if (!spec.nonlinearity.is_exp()) {
    throw Error(ErrorKind::InvalidSpec, "classification needs the exponential problem");
  }
  RadialIntegrator it(spec, controls);
  double horizon = controls.r_max;
  Classification c;
  std::optional<double> continued_log;
  auto continued = [&](double log_r) {
    Classification b;
    b.kind = Outcome::Blowup;
    b.log_R_est = log_r;
    b.R_est = std::exp(log_r);
    b.continued = true;
    b.horizon = it.trajectory().last_radius();
    b.termination = it.trajectory().termination().kind;
    b.first_crossing = sign_crossing_check(it.trajectory());
    return b;
  };
  while (true) {
    const Trajectory& traj = it.advance(horizon);
    const TerminationKind kind = traj.termination().kind;
    c = Classification{};
    c.termination = kind;
    c.horizon = traj.last_radius();
    if (kind == TerminationKind::Blowup) {
      c = detail::blowup_from(traj, c.horizon);
      break;
    }
    if (kind != TerminationKind::ReachedHorizon) {
      if (continued_log) {
        // The rise out of the underflow region was too steep to resolve.
        c = continued(*continued_log);
        c.detail = std::string("continuation after ") + std::string(to_string(kind));
      } else {
        c.detail = std::string("integration stopped: ") + std::string(to_string(kind));
      }
      break;
    }
    c.first_crossing = sign_crossing_check(traj);
    c.sigma = traj.back().v(spec.levels());
    if (spec.dim == 2 && traj.back().u() < kUnderflowLevel && !continued_log) {
      // Closer radii are reached by plain integration, which also resolves the final rise.
      const double log_r = detail::continued_log_radius(traj);
      if (std::isfinite(log_r)) {
        continued_log = log_r;
        if (!opt.extend || log_r > std::log(opt.horizon_cap)) {
          c = continued(log_r);
          break;
        }
      }
    }
    if (spec.dim >= 3 && !c.first_crossing) {
      if (spec.order == 1) {
        c.sigma_limit = sigma_limit(traj);
        if (c.sigma_limit < 0.0) {
          c.kind = Outcome::Global;
          break;
        }
      } else {
        c.kind = Outcome::Global;
        break;
      }
    }
    if (!opt.extend || horizon >= opt.horizon_cap) {
      c.detail = "no blowup event by the horizon cap";
      break;
    }
    horizon = std::min(horizon * opt.extension_factor, opt.horizon_cap);
  }
  if (out) *out = it.take();
  return c;
}

/// Side of the separatrix decided at the horizon without extension.
enum class Side { Below, Above };

struct Shot {
  Side side = Side::Above;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double sigma_limit = std::numeric_limits<double>::quiet_NaN();
};

/// m = 1 shot at beta: Above on a blowup event, a sign crossing, or a nonnegative limit of
/// Δu; Below otherwise. Throws IndeterminateShot when integration fails.
inline Shot decide(int dim, double beta, const IntegrationControls& controls) {
  const auto spec = ProblemSpec::exp_biharmonic(dim, beta);
  const auto traj = integrate(spec, controls);
  const auto kind = traj.termination().kind;
  if (kind == TerminationKind::Blowup) return {Side::Above};
  if (kind != TerminationKind::ReachedHorizon) {
    throw Error(ErrorKind::IndeterminateShot, "shot at beta = " + std::to_string(beta) +
                                                  " ended with " + std::string(to_string(kind)));
  }
  Shot s;
  s.sigma = traj.back().laplacian();
  s.sigma_limit = sigma_limit(traj);
  s.side = (sign_crossing_check(traj) || !(s.sigma_limit < 0.0)) ? Side::Above : Side::Below;
  return s;
}

struct BracketRecord {
  double beta_lo;
  double beta_hi;
  double sigma;        // Δu(r_max) on the lower end
  double sigma_limit;  // tail-corrected limit on the lower end
};

struct SeparatrixResult {
  int dim = 0;
  double r_max = 0.0;
  double tol_beta = 0.0;
  double beta_lo = 0.0;
  double beta_hi = 0.0;
  double beta0_est = 0.0;
  Classification lo_class;
  Classification hi_class;
  Trajectory lo_witness;
  Trajectory hi_witness;
  /// Integration at beta0_est up to r_max.
  Trajectory separatrix;
  /// Lower-end history, one entry per improvement of beta_lo.
  std::vector<BracketRecord> history;
  int shots = 0;
};

/// Bisection on beta with the lower end Global and the upper end certified by a blowup event
/// (horizon extended as needed). Both ends use the same classification.
inline SeparatrixResult find_separatrix(int dim, double r_max, double tol_beta = 1e-8,
                                        IntegrationControls controls = {}) {
  if (!(tol_beta > 0.0)) throw Error(ErrorKind::InvalidControls, "tol_beta must be > 0");
  controls.r_max = r_max;
  controls.validate();
  SeparatrixResult res;
  res.dim = dim;
  res.r_max = r_max;
  res.tol_beta = tol_beta;
  Trajectory traj;
  auto shoot = [&](double beta) {
    ++res.shots;
    Classification c = classify(ProblemSpec::exp_biharmonic(dim, beta), controls, {}, &traj);
    if (c.kind == Outcome::Indeterminate) {
      throw Error(ErrorKind::IndeterminateShot,
                  "shot at beta = " + std::to_string(beta) + ": " + c.detail);
    }
    return c;
  };
  auto record = [&](double lo, double hi) {
    // Lower-end sigma always read at r_max, even when the shot needed a longer horizon.
    const StateVector at = traj.evaluate(r_max);
    res.history.push_back({lo, hi, at.laplacian(), sigma_limit(dim, at)});
  };
  double hi = 0.0, lo = -8.0;
  if (shoot(hi).kind != Outcome::Blowup) {
    throw Error(ErrorKind::BracketFailure, "beta = 0 is not on the blowup side");
  }
  while (shoot(lo).kind != Outcome::Global) {
    hi = lo;
    lo *= 2.0;
    if (lo < -1024.0) {
      throw Error(ErrorKind::BracketFailure,
                  "no global shot down to beta = -1024 (N = " + std::to_string(dim) +
                      ", r_max = " + std::to_string(r_max) + ")");
    }
  }
  record(lo, hi);
  while (hi - lo > tol_beta) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (shoot(mid).kind == Outcome::Global) {
      lo = mid;
      record(lo, hi);
    } else {
      hi = mid;
    }
  }
  res.beta_lo = lo;
  res.beta_hi = hi;
  res.beta0_est = 0.5 * (lo + hi);
  res.lo_class = shoot(lo);
  res.lo_witness = std::move(traj);
  res.hi_class = shoot(hi);
  res.hi_witness = std::move(traj);
  res.separatrix = integrate(ProblemSpec::exp_biharmonic(dim, res.beta0_est), controls);
  return res;
}

struct ScanEntry {
  std::vector<double> init;
  Classification classification;
};

struct ScanReport {
  std::vector<ScanEntry> entries;
  /// Entries that are not a finite-radius blowup.
  std::vector<std::size_t> falsifications;
  /// Indices i (m = 1 beta scans) with log R_est(beta_i) < log R_est(beta_{i+1}).
  std::vector<std::size_t> monotonicity_violations;
  bool all_blowup() const { return falsifications.empty(); }
};

/// Classifies every init vector of an N = 2 lattice (m inferred from the vector length).
inline ScanReport scan_inits(int dim, const std::vector<std::vector<double>>& inits,
                             const IntegrationControls& controls) {
  ScanReport rep;
  for (const auto& init : inits) {
    ProblemSpec spec{dim, static_cast<int>(init.size() / 2), Nonlinearity::exponential(), init};
    Classification c = classify(spec, controls);
    if (!c.finite_blowup()) rep.falsifications.push_back(rep.entries.size());
    rep.entries.push_back({init, c});
  }
  return rep;
}

/// Plane probe: every beta should blow up at a finite radius, and the radius
/// should not increase with beta. `betas` is sorted ascending by the caller.
inline ScanReport scan_n2(const std::vector<double>& betas, const IntegrationControls& controls) {
  std::vector<std::vector<double>> inits;
  for (double b : betas) inits.push_back({0.0, b});
  ScanReport rep = scan_inits(2, inits, controls);
  for (std::size_t i = 0; i + 1 < rep.entries.size(); ++i) {
    const auto& a = rep.entries[i].classification;
    const auto& b = rep.entries[i + 1].classification;
    if (a.finite_blowup() && b.finite_blowup() &&
        b.log_R_est > a.log_R_est + 1e-6 * (1.0 + std::abs(a.log_R_est))) {
      rep.monotonicity_violations.push_back(i);
    }
  }
  return rep;
}

/// Betas (ascending) classified Global above a Blowup: the Blowup set must be up-closed.
inline std::vector<double> monotone_classification_violations(
    const std::vector<std::pair<double, Outcome>>& sorted) {
  std::vector<double> bad;
  bool seen_blowup = false;
  for (const auto& [beta, kind] : sorted) {
    if (kind == Outcome::Blowup) seen_blowup = true;
    if (kind == Outcome::Global && seen_blowup) bad.push_back(beta);
  }
  return bad;
}

/// min over nodes of u - beta r²/(2N) + 1e-8 (1 + r²); nonnegative when the lower bound holds.
inline double lower_bound_margin(const Trajectory& traj) {
  const auto& spec = traj.spec();
  const double alpha = spec.init[0], beta = spec.init[1];
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double r = traj.radius(i);
    const double m = traj.state(i)[0] - alpha - beta * r * r / (2.0 * spec.dim) + 1e-8 * (1.0 + r * r);
    worst = std::min(worst, m);
  }
  return worst;
}

/// min over nodes of -((beta0 - beta)/(2N)) r² + 1e-6 (1 + r²) - u for a shot below beta0.
inline double upper_bound_margin(const Trajectory& traj, double beta0) {
  const auto& spec = traj.spec();
  const double gap = beta0 - spec.init[1];
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double r = traj.radius(i);
    const double bound = -(gap / (2.0 * spec.dim)) * r * r + 1e-6 * (1.0 + r * r);
    worst = std::min(worst, bound - (traj.state(i)[0] - spec.init[0]));
  }
  return worst;
}

/// sup over the nodes of the scaled run of |u_scaled(r) - u(lambda r) - 4 ln lambda|, where
/// the scaled run starts from (alpha + 4 ln lambda, lambda² beta).
inline double scaling_error(int dim, double beta, double lambda, double r_max,
                            const IntegrationControls& base = {}) {
  IntegrationControls c = base;
  c.r_max = r_max;
  const auto ref = integrate(ProblemSpec::exp_biharmonic(dim, beta), c);
  c.r_max = r_max / lambda;
  const auto scaled =
      integrate(ProblemSpec::exp_biharmonic(dim, lambda * lambda * beta, 4.0 * std::log(lambda)), c);
  const double reach = std::min(scaled.last_radius(), ref.last_radius() / lambda);
  double worst = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    const double r = scaled.radius(i);
    if (r > reach || lambda * r < ref.first_radius()) continue;
    const double expect = ref.component(lambda * r, 0) + 4.0 * std::log(lambda);
    worst = std::max(worst, std::abs(scaled.state(i)[0] - expect));
  }
  return worst;
}

}  // namespace polyrad
