#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "polyrad/error.hpp"
#include "polyrad/problem.hpp"

namespace polyrad {

/// Default start radius for the series expansion at the origin.
inline constexpr double kDefaultStartRadius = 1e-4;
inline constexpr double kMaxStartRadius = 1e-3;

namespace detail {

/// Non-throwing right-hand side used inside the integrator. Returns false when
/// the state leaves the domain of f (u <= 0 for the negative power) or when the
/// derivative is not finite.
inline bool radial_rhs_into(const ProblemSpec& spec, double r, std::span<const double> y,
                            std::span<double> dy) {
  const std::size_t levels = spec.levels();
  const double drift = static_cast<double>(spec.dim - 1) / r;
  const double u = y[0];
  if (!spec.nonlinearity.is_exp() && !(u > 0.0)) return false;
  for (std::size_t k = 0; k + 1 < levels; ++k) {
    dy[2 * k] = y[2 * k + 1];
    dy[2 * k + 1] = y[2 * k + 2] - drift * y[2 * k + 1];
  }
  const std::size_t top = 2 * (levels - 1);
  dy[top] = y[top + 1];
  dy[top + 1] = spec.nonlinearity.value(u) - drift * y[top + 1];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(dy[i])) return false;
  }
  return true;
}

}  // namespace detail

/// dy/dr of the first-order radial system at r > 0.
inline std::vector<double> radial_rhs(const ProblemSpec& spec, const StateVector& state) {
  if (state.y.size() != spec.state_size()) {
    throw Error(ErrorKind::InvalidSpec, "state length must be 4m");
  }
  if (!(state.r > 0.0)) throw Error(ErrorKind::BadRadius, "radial_rhs needs r > 0");
  for (double v : state.y) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonfiniteState, "state is not finite");
  }
  if (!spec.nonlinearity.is_exp() && !(state.y[0] > 0.0)) {
    throw Error(ErrorKind::NonpositiveU, "u <= 0 under the negative power");
  }
  std::vector<double> dy(state.y.size());
  if (!detail::radial_rhs_into(spec, state.r, state.y, dy)) {
    throw Error(ErrorKind::NonfiniteState, "derivative overflowed");
  }
  return dy;
}

/// Even power series of the regular solution, truncated after the r^6 terms:
/// v_k(r) = sum_j coeff[k][j] r^{2j}. Index k = 0..2m-1 maps to v_1..v_{2m}.
inline std::vector<std::array<double, 4>> series_coefficients(const ProblemSpec& spec) {
  spec.validate();
  const std::size_t levels = spec.levels();
  const double n = spec.dim;
  std::vector<std::array<double, 4>> a(levels + 1, {0.0, 0.0, 0.0, 0.0});
  for (std::size_t k = 0; k < levels; ++k) a[k][0] = spec.init[k];

  const auto& f = spec.nonlinearity;
  const double u0 = a[0][0];
  // Slot `levels` holds the Taylor coefficients of f(v_1(r)) in powers of r^2.
  for (int j = 1; j <= 3; ++j) {
    switch (j) {
      case 1: a[levels][0] = f.value(u0); break;
      case 2: a[levels][1] = f.d1(u0) * a[0][1]; break;
      case 3: a[levels][2] = f.d1(u0) * a[0][2] + 0.5 * f.d2(u0) * a[0][1] * a[0][1]; break;
    }
    // Δ r^{2j} = 2j (2j + N - 2) r^{2j-2}
    const double lap = 2.0 * j * (2.0 * j + n - 2.0);
    for (std::size_t k = 0; k < levels; ++k) a[k][j] = a[k + 1][j - 1] / lap;
  }
  a.pop_back();
  return a;
}

/// State at a small radius r0 from the series at the origin (error O(r0^8)).
inline StateVector taylor_start(const ProblemSpec& spec, double r0 = kDefaultStartRadius) {
  if (!(r0 > 0.0) || r0 > kMaxStartRadius) {
    throw Error(ErrorKind::BadRadius, "start radius must lie in (0, 1e-3]");
  }
  const auto a = series_coefficients(spec);
  StateVector s{r0, std::vector<double>(spec.state_size(), 0.0)};
  const double x = r0 * r0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& c = a[k];
    s.y[2 * k] = c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    s.y[2 * k + 1] = r0 * (2.0 * c[1] + x * (4.0 * c[2] + x * 6.0 * c[3]));
  }
  return s;
}

/// Integer polynomial p(D) with Δ^{2m} = r^{-4m} p(D) on radial functions,
/// D = d/dt, t = ln r. Coefficients are stored lowest degree first.
struct OperatorPolynomial {
  int dim = 0;
  int order = 0;
  std::vector<std::int64_t> coefficients;

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }

  std::int64_t operator()(std::int64_t k) const {
    __int128 acc = 0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * k + *it;
    return static_cast<std::int64_t>(acc);
  }

  double evaluate(double x) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) {
      acc = acc * x + static_cast<double>(*it);
    }
    return acc;
  }

  /// Coefficients c_1..c_{4m-1} of w^{(4m)} + sum c_i w^{(i)}; the polynomial is monic.
  std::vector<std::int64_t> lower_coefficients() const {
    return {coefficients.begin() + 1, coefficients.end() - 1};
  }

  friend bool operator==(const OperatorPolynomial&, const OperatorPolynomial&) = default;
};

/// Expands prod_{j=0}^{2m-1} (D - 2j)(D + N - 2 - 2j) exactly.
inline OperatorPolynomial emden_fowler_polynomial(int dim, int order) {
  if (dim < 1 || order < 1) throw Error(ErrorKind::InvalidSpec, "need N >= 1 and m >= 1");
  std::vector<std::int64_t> poly{1};
  auto multiply_linear = [&poly](std::int64_t root) {
    // poly *= (D - root)
    std::vector<std::int64_t> next(poly.size() + 1, 0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= root * poly[i];
    }
    poly = std::move(next);
  };
  for (int j = 0; j < 2 * order; ++j) {
    multiply_linear(2 * j);
    multiply_linear(2 + 2 * j - dim);
  }
  return OperatorPolynomial{dim, order, std::move(poly)};
}

/// The explicit N = 4 separatrix u(r) = -4 ln(1 + r^2/(8 sqrt 6)) with u(0) = 0.
namespace closed_form_n4 {

inline const double kScale = 1.0 / (8.0 * std::sqrt(6.0));
/// Δu(0) of the separatrix, -4/sqrt(6).
inline const double kBeta0 = -4.0 / std::sqrt(6.0);

inline double u(double r) { return -4.0 * std::log1p(kScale * r * r); }

/// d^k u / dr^k for k = 0..4.
inline double derivative(double r, int k) {
  const double c = kScale;
  const double x = c * r * r;
  const double s = 1.0 + x;
  switch (k) {
    case 0: return u(r);
    case 1: return -8.0 * c * r / s;
    case 2: return 8.0 * c * (x - 1.0) / (s * s);
    case 3: return -16.0 * c * c * r * (x - 3.0) / (s * s * s);
    case 4: return 48.0 * c * c * (x * x - 6.0 * x + 1.0) / (s * s * s * s);
    default: throw Error(ErrorKind::OutOfRange, "derivative order must be 0..4");
  }
}

inline double laplacian(double r) {
  const double x = kScale * r * r;
  return -16.0 * kScale * (x + 2.0) / ((1.0 + x) * (1.0 + x));
}

inline double laplacian_derivative(double r) {
  const double x = kScale * r * r;
  const double s = 1.0 + x;
  return 32.0 * kScale * kScale * r * (x + 3.0) / (s * s * s);
}

inline double bilaplacian(double r) {
  const double s = 1.0 + kScale * r * r;
  return 384.0 * kScale * kScale / (s * s * s * s);
}

inline StateVector state(double r) {
  return {r, {u(r), derivative(r, 1), laplacian(r), laplacian_derivative(r)}};
}

}  // namespace closed_form_n4

}  // namespace polyrad
