#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "polyrad/error.hpp"

namespace polyrad {

enum class NonlinearityKind { Exp, NegPower };

/// Right-hand side of Δ^{2m} u = f(u): either e^u or -u^{-p}.
struct Nonlinearity {
  NonlinearityKind kind = NonlinearityKind::Exp;
  double p = 0.0;

  static Nonlinearity exponential() { return {NonlinearityKind::Exp, 0.0}; }
  static Nonlinearity negative_power(double p) { return {NonlinearityKind::NegPower, p}; }

  bool is_exp() const { return kind == NonlinearityKind::Exp; }

  // f, f', f'' at u. NegPower requires u > 0.
  double value(double u) const {
    return is_exp() ? std::exp(u) : -std::pow(u, -p);
  }
  double d1(double u) const {
    return is_exp() ? std::exp(u) : p * std::pow(u, -p - 1.0);
  }
  double d2(double u) const {
    return is_exp() ? std::exp(u) : -p * (p + 1.0) * std::pow(u, -p - 2.0);
  }

  friend bool operator==(const Nonlinearity&, const Nonlinearity&) = default;
};

/// One radial initial value problem Δ^{2m} u = f(u) in R^N.
///
/// `init` holds (u(0), Δu(0), ..., Δ^{2m-1}u(0)); all odd radial derivatives
/// vanish at the origin.
struct ProblemSpec {
  int dim = 3;
  int order = 1;
  Nonlinearity nonlinearity = Nonlinearity::exponential();
  std::vector<double> init{0.0, 0.0};

  /// Canonical exponential biharmonic problem with u(0)=alpha, Δu(0)=beta.
  static ProblemSpec exp_biharmonic(int dim, double beta, double alpha = 0.0) {
    return ProblemSpec{dim, 1, Nonlinearity::exponential(), {alpha, beta}};
  }

  static ProblemSpec neg_power(int dim, double p, double a, double b) {
    return ProblemSpec{dim, 1, Nonlinearity::negative_power(p), {a, b}};
  }

  std::size_t levels() const { return static_cast<std::size_t>(2 * order); }
  std::size_t state_size() const { return static_cast<std::size_t>(4 * order); }

  void validate() const {
    if (dim < 1) throw Error(ErrorKind::InvalidSpec, "dimension N must be >= 1");
    if (order < 1) throw Error(ErrorKind::InvalidSpec, "order m must be >= 1");
    if (init.size() != levels()) {
      throw Error(ErrorKind::InvalidSpec,
                  "init must hold 2m = " + std::to_string(levels()) + " values");
    }
    for (double v : init) {
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidSpec, "init values must be finite");
    }
    if (!nonlinearity.is_exp()) {
      if (!(nonlinearity.p > 0.0)) throw Error(ErrorKind::InvalidSpec, "exponent p must be > 0");
      if (!(init[0] > 0.0)) throw Error(ErrorKind::InvalidSpec, "negative power needs u(0) > 0");
    }
  }

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

/// Radial state at radius r, ordered (v1, v1', v2, v2', ..., v_{2m}, v_{2m}').
struct StateVector {
  double r = 0.0;
  std::vector<double> y;

  // 1-based level accessors: v(1) = u, v(2) = Δu, ...
  double v(std::size_t k) const { return y[2 * (k - 1)]; }
  double dv(std::size_t k) const { return y[2 * (k - 1) + 1]; }
  double u() const { return y[0]; }
  double laplacian() const { return y[2]; }

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

}  // namespace polyrad
