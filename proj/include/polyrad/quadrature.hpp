#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>

#include "polyrad/error.hpp"
#include "polyrad/integrator.hpp"

namespace polyrad {

namespace gauss_legendre {

// Nodes and weights on [-1, 1].
inline constexpr std::array<double, 3> kNodes3{-0.7745966692414833770, 0.0,
                                               0.7745966692414833770};
inline constexpr std::array<double, 3> kWeights3{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
inline constexpr std::array<double, 5> kNodes5{-0.9061798459386639928, -0.5384693101056830910, 0.0,
                                               0.5384693101056830910, 0.9061798459386639928};
inline constexpr std::array<double, 5> kWeights5{0.2369268850561890875, 0.4786286704993664680,
                                                 0.5688888888888888889, 0.4786286704993664680,
                                                 0.2369268850561890875};

/// 5-point rule on [a, b] together with |GL5 - GL3| as a local error indicator.
template <class F>
std::pair<double, double> rule(double a, double b, F&& f) {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s5 = 0.0, s3 = 0.0;
  for (std::size_t i = 0; i < kNodes5.size(); ++i) s5 += kWeights5[i] * f(mid + half * kNodes5[i]);
  for (std::size_t i = 0; i < kNodes3.size(); ++i) s3 += kWeights3[i] * f(mid + half * kNodes3[i]);
  return {half * s5, half * std::abs(s5 - s3)};
}

}  // namespace gauss_legendre

struct QuadratureSum {
  double value = 0.0;
  double error = 0.0;
};

/// Integral over [a, b] of g(t, u(t)) using the dense output of v1, one 5-point rule per
/// accepted step (partial steps at the ends).
template <class G>
QuadratureSum integrate_dense(const Trajectory& traj, double a, double b, G&& g) {
  QuadratureSum out;
  if (!(b > a)) return out;
  std::size_t seg = traj.segment_of(a);
  const std::size_t last = traj.segment_of(b);
  for (; seg <= last; ++seg) {
    const double r0 = traj.radius(seg), r1 = traj.radius(seg + 1);
    const double lo = std::max(a, r0), hi = std::min(b, r1);
    if (!(hi > lo)) continue;
    const double h = r1 - r0;
    auto f = [&](double t) { return g(t, traj.dense_value(seg, (t - r0) / h, 0)); };
    auto [v, e] = gauss_legendre::rule(lo, hi, f);
    out.value += v;
    out.error += e;
  }
  return out;
}

enum class TailModelKind { None, Exponential, PowerLaw };

constexpr std::string_view to_string(TailModelKind k) {
  switch (k) {
    case TailModelKind::None: return "none";
    case TailModelKind::Exponential: return "exponential";
    case TailModelKind::PowerLaw: return "power_law";
  }
  return "unknown";
}

/// Upper envelope for u beyond the last node: u(t) <= slope * x(t) + intercept, where
/// x = t (exponential tail) or x = ln t (power-law tail), fitted on the last decade.
struct TailFit {
  TailModelKind kind = TailModelKind::None;
  double slope = 0.0;
  double intercept = 0.0;
  double from = 0.0;
  double linear_slope = 0.0;  // slope of the linear fit, always computed
};

namespace detail {

struct LineFit {
  double slope, intercept, max_dev;
};

template <class X>
LineFit envelope_fit(const Trajectory& traj, std::size_t first, X&& x_of) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const std::size_t n = traj.size() - first;
  for (std::size_t i = first; i < traj.size(); ++i) {
    const double x = x_of(traj.radius(i)), y = traj.state(i)[0];
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double m = static_cast<double>(n);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double icpt = (sy - slope * sx) / m;
  double lift = -std::numeric_limits<double>::infinity(), dev = 0.0;
  for (std::size_t i = first; i < traj.size(); ++i) {
    const double res = traj.state(i)[0] - (slope * x_of(traj.radius(i)) + icpt);
    lift = std::max(lift, res);
    dev = std::max(dev, std::abs(res));
  }
  return {slope, icpt + lift, dev};
}

// ∫_R^∞ t^k e^{λ t} dt for λ < 0 and integer k >= 0.
inline double exp_moment(int k, double lambda, double from) {
  const double mu = -lambda;
  double term = 1.0 / mu, sum = 0.0;
  // k!/(k-j)! R^{k-j} / mu^{j+1}
  double fall = 1.0;
  for (int j = 0; j <= k; ++j) {
    sum += fall * std::pow(from, k - j) * term;
    fall *= static_cast<double>(k - j);
    term /= mu;
  }
  return std::exp(lambda * from) * sum;
}

}  // namespace detail

/// Fits the tail envelope on nodes with r >= R/10 (at least 3 nodes).
inline TailFit fit_tail(const Trajectory& traj, int k) {
  const double big_r = traj.last_radius();
  std::size_t first = static_cast<std::size_t>(
      std::lower_bound(traj.radii().begin(), traj.radii().end(), 0.1 * big_r) -
      traj.radii().begin());
  if (traj.size() < 3) throw Error(ErrorKind::TailNotIntegrable, "too few nodes for a tail fit");
  first = std::min(first, traj.size() - 3);
  const auto lin = detail::envelope_fit(traj, first, [](double r) { return r; });
  if (!(lin.slope < 0.0)) {
    throw Error(ErrorKind::TailNotIntegrable, "fitted exponential rate is not negative");
  }
  TailFit fit{TailModelKind::Exponential, lin.slope, lin.intercept, big_r, lin.slope};
  if (traj.radius(first) > 0.0) {
    const auto pw = detail::envelope_fit(traj, first, [](double r) { return std::log(r); });
    if (pw.slope + k + 1.0 < 0.0 && pw.max_dev < lin.max_dev) {
      fit.kind = TailModelKind::PowerLaw;
      fit.slope = pw.slope;
      fit.intercept = pw.intercept;
    }
  }
  return fit;
}

/// ∫_{from}^∞ t^k exp(model(t)) dt for from >= fit.from.
inline double tail_moment(const TailFit& fit, int k, double from) {
  switch (fit.kind) {
    case TailModelKind::None: return 0.0;
    case TailModelKind::Exponential:
      return std::exp(fit.intercept) * detail::exp_moment(k, fit.slope, from);
    case TailModelKind::PowerLaw: {
      const double e = k + 1.0 + fit.slope;
      return std::exp(fit.intercept) * std::pow(from, e) / (-e);
    }
  }
  return 0.0;
}

enum class TailPolicy { Fit, None };

struct WeightedIntegral {
  double value = 0.0;        // head + body + tail
  double error_bound = 0.0;  // quadrature + interpolation + head + tail
  double head = 0.0;
  double body = 0.0;
  double tail = 0.0;
  double quadrature_error = 0.0;
  TailFit tail_fit;
};

/// ∫_0^∞ t^k e^{u(t)} dt: analytic head on [0, r0], Gauss-Legendre over the steps, and the
/// fitted tail beyond the last node (reported and also counted in the error bound).
inline WeightedIntegral quadrature_weighted(const Trajectory& traj, int k,
                                            TailPolicy policy = TailPolicy::Fit) {
  if (!traj.spec().nonlinearity.is_exp()) {
    throw Error(ErrorKind::InvalidSpec, "weighted quadrature needs the exponential problem");
  }
  if (traj.termination().kind != TerminationKind::ReachedHorizon) {
    throw Error(ErrorKind::NotSeparatrix, "trajectory did not reach its horizon");
  }
  if (k < 0) throw Error(ErrorKind::OutOfRange, "moment order must be >= 0");
  WeightedIntegral out;
  const double r0 = traj.first_radius();
  const double u0 = traj.spec().init[0];
  const double beta = traj.spec().init.size() > 1 ? traj.spec().init[1] : 0.0;
  out.head = std::exp(u0) * std::pow(r0, k + 1) / (k + 1.0);
  const double head_err =
      std::exp(u0) * std::abs(beta) / (2.0 * traj.spec().dim) * std::pow(r0, k + 3) / (k + 3.0);

  const auto body = integrate_dense(traj, r0, traj.last_radius(), [k](double t, double u) {
    return std::pow(t, k) * std::exp(u);
  });
  out.body = body.value;
  out.quadrature_error = body.error;
  if (policy == TailPolicy::Fit) {
    out.tail_fit = fit_tail(traj, k);
    out.tail = tail_moment(out.tail_fit, k, traj.last_radius());
  }
  out.value = out.head + out.body + out.tail;
  const double interp = 10.0 * traj.controls().rtol * std::abs(out.body);
  out.error_bound = body.error + interp + head_err + out.tail;
  return out;
}

/// ∫_r^∞ t^k e^{u(t)} dt from the dense output on [r, R] plus the fitted tail.
inline QuadratureSum upper_moment(const Trajectory& traj, const TailFit& fit, int k, double r) {
  auto body = integrate_dense(traj, r, traj.last_radius(),
                              [k](double t, double u) { return std::pow(t, k) * std::exp(u); });
  const double tail = tail_moment(fit, k, traj.last_radius());
  return {body.value + tail, body.error + tail};
}

}  // namespace polyrad
