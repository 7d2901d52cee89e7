#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/Polynomials>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "polyrad/error.hpp"
#include "polyrad/integrator.hpp"
#include "polyrad/quadrature.hpp"
#include "polyrad/radial_system.hpp"

namespace polyrad {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

struct ResidualSample {
  double r = 0.0;
  double u = 0.0;
  double fit = 0.0;
  /// u - fit from the dense output. Beyond r of about 10 this is dominated by the finite
  /// bracket (a δβ r² component of the trajectory) and by cancellation.
  double direct = 0.0;
  /// (1/(6r)) ∫_r^∞ t (t - r)³ e^u dt, the same quantity without cancellation.
  double stable = 0.0;
};

struct ExpansionReport {
  Estimate alpha1, alpha2, alpha3;
  /// a = -(R² v'(R) + ∫_R^∞ t² e^u) from the flux identity, independent of the quadrature of α1.
  Estimate a;
  bool a_consistent = false;
  std::vector<ResidualSample> residuals;
  /// Largest ratio |res(r_{i+1})| / |res(r_i)| of the stable residual over consecutive samples.
  double decay_ratio = std::numeric_limits<double>::quiet_NaN();
  /// Spread of each α between the separatrix and the other bracket trajectories.
  double bracket_spread = 0.0;
};

inline const std::vector<double>& default_residual_radii() {
  static const std::vector<double> radii{20.0, 30.0, 40.0, 60.0, 80.0};
  return radii;
}

namespace detail {

inline void require_separatrix(const Trajectory& traj, int dim) {
  if (!traj.spec().nonlinearity.is_exp() || traj.spec().order != 1) {
    throw Error(ErrorKind::InvalidSpec, "expansion needs the exponential biharmonic problem");
  }
  if (traj.spec().dim != dim) {
    throw Error(ErrorKind::InvalidSpec, "trajectory dimension differs from N = " + std::to_string(dim));
  }
  if (traj.termination().kind != TerminationKind::ReachedHorizon) {
    throw Error(ErrorKind::NotSeparatrix, "trajectory terminated with " +
                                              std::string(to_string(traj.termination().kind)));
  }
}

/// ∫_0^r t^k e^u dt: series head on [0, r0] plus quadrature of the dense output.
inline QuadratureSum lower_moment(const Trajectory& traj, int k, double r) {
  const double r0 = traj.first_radius();
  const double u0 = traj.spec().init[0];
  auto body = integrate_dense(traj, r0, r, [k](double t, double u) { return std::pow(t, k) * std::exp(u); });
  body.value += std::exp(u0) * std::pow(r0, k + 1) / (k + 1.0);
  return body;
}

struct Alphas {
  WeightedIntegral m2, m3, m4;
};

inline Alphas moments(const Trajectory& traj) {
  return {quadrature_weighted(traj, 2), quadrature_weighted(traj, 3), quadrature_weighted(traj, 4)};
}

}  // namespace detail

/// ∫_{R³} |x|^power e^u dx of a radial profile.
inline double volume_integral(const Trajectory& traj, int power) {
  return 4.0 * std::numbers::pi * quadrature_weighted(traj, power + 2).value;
}

/// Coefficients of u = α1 r + α2 + α3/r + O(e^{-cr}) for the N = 3 separatrix, with
/// α1 = -(1/2)∫t²e^u, α2 = (1/2)∫t³e^u, α3 = -(1/6)∫t⁴e^u. `bracket` holds other
/// trajectories of the final bracket; their spread enters every error bar.
inline ExpansionReport expansion_coefficients(
    const Trajectory& traj, std::span<const Trajectory> bracket = {},
    const std::vector<double>& sample_radii = default_residual_radii()) {
  detail::require_separatrix(traj, 3);
  const auto mom = detail::moments(traj);
  ExpansionReport rep;
  rep.alpha1 = {-0.5 * mom.m2.value, 0.5 * mom.m2.error_bound};
  rep.alpha2 = {0.5 * mom.m3.value, 0.5 * mom.m3.error_bound};
  rep.alpha3 = {-mom.m4.value / 6.0, mom.m4.error_bound / 6.0};

  double spread1 = 0.0, spread2 = 0.0, spread3 = 0.0;
  for (const auto& other : bracket) {
    detail::require_separatrix(other, 3);
    const auto om = detail::moments(other);
    spread1 = std::max(spread1, std::abs(-0.5 * om.m2.value - rep.alpha1.value));
    spread2 = std::max(spread2, std::abs(0.5 * om.m3.value - rep.alpha2.value));
    spread3 = std::max(spread3, std::abs(-om.m4.value / 6.0 - rep.alpha3.value));
  }
  rep.alpha1.error += spread1;
  rep.alpha2.error += spread2;
  rep.alpha3.error += spread3;
  rep.bracket_spread = std::max({spread1, spread2, spread3});

  // (r² v')' = r² e^u in N = 3, so R² v'(R) carries ∫_0^R t² e^u; only the tail is quadrature.
  const auto end = traj.back();
  const double flux = end.r * end.r * end.dv(2);
  const double tail = tail_moment(mom.m2.tail_fit, 2, end.r);
  rep.a = {-(flux + tail), tail + 10.0 * traj.controls().rtol * std::abs(flux) + 2.0 * spread1};
  rep.a_consistent =
      std::abs(rep.a.value - 2.0 * rep.alpha1.value) <= rep.a.error + 2.0 * rep.alpha1.error;

  const TailFit& fit = mom.m4.tail_fit;
  for (double r : sample_radii) {
    if (r > traj.last_radius()) continue;
    ResidualSample s;
    s.r = r;
    s.u = traj.component(r, 0);
    s.fit = rep.alpha1.value * r + rep.alpha2.value + rep.alpha3.value / r;
    s.direct = s.u - s.fit;
    const auto kernel = integrate_dense(traj, r, traj.last_radius(), [r](double t, double u) {
      const double d = t - r;
      return t * d * d * d * std::exp(u);
    });
    // Tail: ∫_R^∞ t (t - r)³ e^u expanded into moments of order 1..4.
    const double tail_part = tail_moment(fit, 4, traj.last_radius()) -
                             3.0 * r * tail_moment(fit, 3, traj.last_radius()) +
                             3.0 * r * r * tail_moment(fit, 2, traj.last_radius()) -
                             r * r * r * tail_moment(fit, 1, traj.last_radius());
    s.stable = (kernel.value + tail_part) / (6.0 * r);
    rep.residuals.push_back(s);
  }
  for (std::size_t i = 1; i < rep.residuals.size(); ++i) {
    const double ratio = std::abs(rep.residuals[i].stable) / std::abs(rep.residuals[i - 1].stable);
    rep.decay_ratio = std::isnan(rep.decay_ratio) ? ratio : std::max(rep.decay_ratio, ratio);
  }
  return rep;
}

struct RepresentationSample {
  double r = 0.0;
  double u = 0.0;
  double rhs = 0.0;
  double error_bound = 0.0;
  double v = 0.0;      // -Δu from the trajectory
  double v_rhs = 0.0;  // its integral representation
};

struct RepresentationCheck {
  double max_deviation = 0.0;
  double max_v_deviation = 0.0;
  std::vector<RepresentationSample> samples;
};

/// N = 3 separatrix:
///   u(r) = a r/2 + (1/2)∫_0^r t³e^u - (1/(6r))∫_0^r t⁴e^u + (r/2)∫_r^∞ t²e^u - (r²/6)∫_r^∞ t e^u
///   -Δu(r) = (1/r)∫_0^r t² e^u + ∫_r^∞ t e^u
/// with a = -∫_0^∞ t² e^u.
inline RepresentationCheck integral_representation_check(const Trajectory& traj,
                                                         const std::vector<double>& r_samples) {
  detail::require_separatrix(traj, 3);
  const auto m2 = quadrature_weighted(traj, 2);
  const double a = -m2.value;
  const TailFit fit1 = fit_tail(traj, 1);
  RepresentationCheck out;
  for (double r : r_samples) {
    if (!(r >= traj.first_radius()) || r > traj.last_radius()) {
      throw Error(ErrorKind::OutOfRange, "sample radius outside the trajectory");
    }
    const auto lo3 = detail::lower_moment(traj, 3, r);
    const auto lo4 = detail::lower_moment(traj, 4, r);
    const auto lo2 = detail::lower_moment(traj, 2, r);
    const auto up2 = upper_moment(traj, m2.tail_fit, 2, r);
    const auto up1 = upper_moment(traj, fit1, 1, r);
    RepresentationSample s;
    s.r = r;
    s.u = traj.component(r, 0);
    s.rhs = a * r / 2.0 + 0.5 * lo3.value - lo4.value / (6.0 * r) + 0.5 * r * up2.value -
            r * r / 6.0 * up1.value;
    s.error_bound = r / 2.0 * m2.error_bound + 0.5 * lo3.error + lo4.error / (6.0 * r) +
                    0.5 * r * up2.error + r * r / 6.0 * up1.error +
                    10.0 * traj.controls().rtol * (1.0 + std::abs(s.u));
    s.v = -traj.component(r, 2);
    s.v_rhs = lo2.value / r + up1.value;
    out.max_deviation = std::max(out.max_deviation, std::abs(s.rhs - s.u));
    out.max_v_deviation = std::max(out.max_v_deviation, std::abs(s.v_rhs - s.v));
    out.samples.push_back(s);
  }
  return out;
}

struct LogLimitResult {
  double estimate = 0.0;
  double target = 0.0;
  double gap = 0.0;
  /// Plain Richardson in 1/r on the same samples, for comparison.
  double richardson = 0.0;
  std::vector<std::pair<double, double>> samples;  // (r, u + 4 ln r)
  /// Slowest decaying mode r^{decay} cos(freq ln r) of the linearization about the limit.
  double decay = 0.0;
  double frequency = 0.0;
};

/// Roots of p(λ) + 4c₁ (p the operator polynomial, c₁ its linear coefficient): exponents of
/// the perturbations z ~ r^λ of w = -4 ln r + ln[8(N-2)(N-4)].
inline std::vector<std::complex<double>> linearized_modes(int dim) {
  const auto poly = emden_fowler_polynomial(dim, 1);
  Eigen::VectorXd c(poly.coefficients.size());
  for (std::size_t i = 0; i < poly.coefficients.size(); ++i) {
    c(static_cast<Eigen::Index>(i)) = static_cast<double>(poly.coefficients[i]);
  }
  c(0) += 4.0 * c(1);
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(c);
  std::vector<std::complex<double>> roots(solver.roots().begin(), solver.roots().end());
  std::sort(roots.begin(), roots.end(), [](auto x, auto y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return roots;
}

inline double log_limit_target(int dim) { return std::log(8.0 * (dim - 2.0) * (dim - 4.0)); }

/// Extrapolates u + 4 ln r from r_eval/4, r_eval/2, r_eval. The residual decays like the
/// slowest linearized mode r^a cos(b ln r + φ), which is fitted exactly on the three samples.
inline LogLimitResult log_limit_check(const Trajectory& traj, double r_eval = 0.0) {
  const int dim = traj.spec().dim;
  if (dim < 5) throw Error(ErrorKind::InvalidSpec, "log limit applies for N >= 5");
  if (traj.termination().kind != TerminationKind::ReachedHorizon) {
    throw Error(ErrorKind::NotSeparatrix, "trajectory terminated before its horizon");
  }
  if (r_eval <= 0.0) r_eval = traj.last_radius();
  LogLimitResult res;
  res.target = log_limit_target(dim);
  for (double r : {r_eval / 4.0, r_eval / 2.0, r_eval}) {
    res.samples.emplace_back(r, traj.component(r, 0) + 4.0 * std::log(r));
  }
  std::complex<double> slow{-std::numeric_limits<double>::infinity(), 0.0};
  for (auto z : linearized_modes(dim)) {
    if (z.real() < -1e-12 && z.real() > slow.real()) slow = z;
  }
  res.decay = slow.real();
  res.frequency = std::abs(slow.imag());
  Eigen::Matrix3d m;
  Eigen::Vector3d y;
  for (int i = 0; i < 3; ++i) {
    const double r = res.samples[i].first, lr = std::log(r);
    const double amp = std::pow(r, res.decay);
    m(i, 0) = 1.0;
    if (res.frequency > 0.0) {
      m(i, 1) = amp * std::cos(res.frequency * lr);
      m(i, 2) = amp * std::sin(res.frequency * lr);
    } else {
      m(i, 1) = amp;
      m(i, 2) = amp * lr;  // repeated real root
    }
    y(i) = res.samples[i].second;
  }
  res.estimate = m.colPivHouseholderQr().solve(y)(0);
  res.gap = std::abs(res.estimate - res.target);
  // Richardson for an O(1/r) error: samples at r/4, r/2, r.
  const double f1 = res.samples[0].second, f2 = res.samples[1].second, f3 = res.samples[2].second;
  const double once_a = 2.0 * f2 - f1, once_b = 2.0 * f3 - f2;
  res.richardson = (4.0 * once_b - once_a) / 3.0;
  return res;
}

struct SupersolutionCheck {
  bool pass = false;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_r = 0.0;
  double max_psi = 0.0;
  double argmax = 0.0;
  /// Largest difference between the ψ form and the ODE form of the margin.
  double form_mismatch = 0.0;
  bool unimodal = true;
};

/// ψ(r) = r (1+r)^5 e^{-εr²} / (2 (r+4)).
inline double supersolution_psi(double eps, double r) {
  return r * std::pow(1.0 + r, 5) * std::exp(-eps * r * r) / (2.0 * (r + 4.0));
}

/// ψ'/ψ.
inline double supersolution_log_slope(double eps, double r) {
  return 1.0 / r + 5.0 / (1.0 + r) - 1.0 / (r + 4.0) - 2.0 * eps * r;
}

inline double supersolution_margin(double eps, double b, double r) {
  return 1.0 - supersolution_psi(eps, r) * std::exp(-b);
}

/// ũ = -εr² + ln(1+r) - b is a supersolution of (r⁴ũ‴)' = r⁴e^ũ where e^b >= ψ. Margin is the
/// relative slack 1 - r⁴e^ũ / (r⁴ũ‴)' = 1 - ψ e^{-b}; pass when it is >= -1e-10 on the grid.
inline SupersolutionCheck check_supersolution(double eps, double b, std::vector<double> r_grid) {
  if (!(eps > 0.0)) throw Error(ErrorKind::OutOfRange, "epsilon must be > 0");
  SupersolutionCheck out;
  double r_hi = 1.0;
  while (supersolution_log_slope(eps, r_hi) > 0.0) r_hi *= 2.0;
  // Golden-section on (0, r_hi], then Newton on ψ'/ψ = 0.
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = r_hi;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = supersolution_psi(eps, x1), f2 = supersolution_psi(eps, x2);
  while (hi - lo > 1e-8 * (1.0 + hi)) {
    if (f1 > f2) {
      hi = x2; x2 = x1; f2 = f1; x1 = hi - g * (hi - lo); f1 = supersolution_psi(eps, x1);
    } else {
      lo = x1; x1 = x2; f1 = f2; x2 = lo + g * (hi - lo); f2 = supersolution_psi(eps, x2);
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 20; ++it) {
    const double h = 1e-6 * x;
    const double d = (supersolution_log_slope(eps, x + h) - supersolution_log_slope(eps, x - h)) / (2 * h);
    const double step = supersolution_log_slope(eps, x) / d;
    x -= step;
    if (std::abs(step) < 1e-15 * x) break;
  }
  out.argmax = x;
  out.max_psi = supersolution_psi(eps, x);

  r_grid.push_back(out.argmax);
  std::sort(r_grid.begin(), r_grid.end());
  int sign_changes = 0;
  double prev = 0.0;
  for (double r : r_grid) {
    if (!(r > 0.0)) continue;
    const double s = supersolution_log_slope(eps, r);
    if (prev != 0.0 && s != 0.0 && (s > 0.0) != (prev > 0.0)) ++sign_changes;
    if (s != 0.0) prev = s;
    const double margin = supersolution_margin(eps, b, r);
    // ODE form: (r⁴ũ‴)' = 8r³/(1+r)³ - 6r⁴/(1+r)⁴ against r⁴ e^ũ.
    const double lhs = 8.0 * r * r * r / std::pow(1.0 + r, 3) - 6.0 * std::pow(r, 4) / std::pow(1.0 + r, 4);
    const double src = std::pow(r, 4) * std::exp(-eps * r * r + std::log1p(r) - b);
    const double ode_margin = (lhs - src) / lhs;
    out.form_mismatch = std::max(out.form_mismatch, std::abs(ode_margin - margin));
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.worst_r = r;
    }
  }
  out.unimodal = sign_changes <= 1;
  out.pass = out.worst_margin >= -1e-10;
  return out;
}

}  // namespace polyrad
