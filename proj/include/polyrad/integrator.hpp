#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyrad/error.hpp"
#include "polyrad/problem.hpp"
#include "polyrad/radial_system.hpp"

namespace polyrad {

struct IntegrationControls {
  double rtol = 1e-10;
  double atol = 1e-12;
  double r_max = 40.0;
  double u_max = 40.0;   // blowup threshold on v1 (exponential case)
  double u_min = 1e-8;   // extinction threshold on v1 (negative power)
  double h_min = 1e-13;
  std::size_t max_steps = 10'000'000;
  double r0 = kDefaultStartRadius;

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) {
      throw Error(ErrorKind::InvalidControls, "tolerances must be positive");
    }
    if (!(h_min > 0.0)) throw Error(ErrorKind::InvalidControls, "h_min must be positive");
    if (!(u_min > 0.0) || !(u_max > 0.0)) {
      throw Error(ErrorKind::InvalidControls, "thresholds must be positive");
    }
    if (!(r_max > r0)) throw Error(ErrorKind::InvalidControls, "r_max must exceed the start radius");
    if (max_steps == 0) throw Error(ErrorKind::InvalidControls, "max_steps must be positive");
  }

  IntegrationControls tightened(double factor) const {
    IntegrationControls c = *this;
    c.rtol /= factor;
    c.atol /= factor;
    return c;
  }

  friend bool operator==(const IntegrationControls&, const IntegrationControls&) = default;
};

enum class TerminationKind { ReachedHorizon, Blowup, Extinct, StepUnderflow, StepLimit };

constexpr std::string_view to_string(TerminationKind k) {
  switch (k) {
    case TerminationKind::ReachedHorizon: return "ReachedHorizon";
    case TerminationKind::Blowup: return "Blowup";
    case TerminationKind::Extinct: return "Extinct";
    case TerminationKind::StepUnderflow: return "StepUnderflow";
    case TerminationKind::StepLimit: return "StepLimit";
  }
  return "Unknown";
}

struct Termination {
  TerminationKind kind = TerminationKind::ReachedHorizon;
  /// Event radius for Blowup/Extinct, otherwise the last radius reached.
  double radius = 0.0;
  /// Blowup only: R from the fit u ~ c - kappa ln(R - r) over the last nodes.
  double fitted_radius = std::numeric_limits<double>::quiet_NaN();
  double fitted_kappa = std::numeric_limits<double>::quiet_NaN();
  /// StepUnderflow only: v1 was close to the event threshold when the step collapsed.
  bool near_threshold = false;
};

/// Accepted integration nodes with the Dormand-Prince quartic continuous extension.
class Trajectory {
 public:
  static constexpr std::size_t kDenseTerms = 5;

  Trajectory() = default;
  Trajectory(ProblemSpec spec, IntegrationControls controls)
      : spec_(std::move(spec)), controls_(controls), dim_(spec_.state_size()) {}

  const ProblemSpec& spec() const { return spec_; }
  const IntegrationControls& controls() const { return controls_; }
  const Termination& termination() const { return termination_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return radii_.size(); }
  bool empty() const { return radii_.empty(); }

  double radius(std::size_t i) const { return radii_[i]; }
  std::span<const double> state(std::size_t i) const {
    return {states_.data() + i * dim_, dim_};
  }
  StateVector node(std::size_t i) const {
    auto s = state(i);
    return {radii_[i], {s.begin(), s.end()}};
  }
  const std::vector<double>& radii() const { return radii_; }

  double first_radius() const { return radii_.front(); }
  double last_radius() const { return radii_.back(); }
  StateVector back() const { return node(size() - 1); }

  double max_error_norm() const { return max_error_norm_; }
  std::size_t rejected_steps() const { return rejected_steps_; }

  /// Index of the segment [radius(i), radius(i+1)] containing r.
  std::size_t segment_of(double r) const {
    check_range(r);
    auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
    std::size_t i = static_cast<std::size_t>(it - radii_.begin());
    if (i == 0) return 0;
    return std::min(i - 1, size() - 2);
  }

  /// Dense-output value of one state component. Exact at node radii.
  double component(double r, std::size_t comp) const {
    if (size() == 1) {
      check_range(r);
      return states_[comp];
    }
    const std::size_t seg = segment_of(r);
    if (r == radii_[seg]) return states_[seg * dim_ + comp];
    if (r == radii_[seg + 1]) return states_[(seg + 1) * dim_ + comp];
    return dense_value(seg, (r - radii_[seg]) / (radii_[seg + 1] - radii_[seg]), comp);
  }

  StateVector evaluate(double r) const {
    StateVector s{r, std::vector<double>(dim_)};
    for (std::size_t c = 0; c < dim_; ++c) s.y[c] = component(r, c);
    return s;
  }

  /// Value of component `comp` at local coordinate theta in [0,1] of segment `seg`.
  double dense_value(std::size_t seg, double theta, std::size_t comp) const {
    const double* d = dense_.data() + seg * kDenseTerms * dim_;
    const double r1 = d[comp], r2 = d[dim_ + comp], r3 = d[2 * dim_ + comp],
                 r4 = d[3 * dim_ + comp], r5 = d[4 * dim_ + comp];
    const double t1 = 1.0 - theta;
    return r1 + theta * (r2 + t1 * (r3 + theta * (r4 + t1 * r5)));
  }

  /// Builds a trajectory from sampled states. `state_at(r)` returns the full state at r and
  /// `slope_at(r)` its r-derivative; the quartic per segment matches endpoint values and
  /// slopes plus the midpoint value. Used for synthetic inputs and oracles.
  static Trajectory from_function(ProblemSpec spec, const std::vector<double>& radii,
                                  const std::function<std::vector<double>(double)>& state_at,
                                  const std::function<std::vector<double>(double)>& slope_at,
                                  Termination termination = {}) {
    IntegrationControls controls;
    controls.r0 = radii.front();
    controls.r_max = radii.back();
    Trajectory t(std::move(spec), controls);
    const std::size_t dim = t.dim_;
    std::vector<double> y0 = state_at(radii.front());
    std::vector<double> f0 = slope_at(radii.front());
    t.push_node(radii.front(), y0);
    for (std::size_t i = 1; i < radii.size(); ++i) {
      const double h = radii[i] - radii[i - 1];
      std::vector<double> y1 = state_at(radii[i]);
      std::vector<double> f1 = slope_at(radii[i]);
      std::vector<double> ym = state_at(radii[i - 1] + 0.5 * h);
      std::vector<double> block(kDenseTerms * dim);
      for (std::size_t c = 0; c < dim; ++c) {
        const double a1 = y0[c];
        const double a2 = y1[c] - y0[c];
        const double a3 = h * f0[c] - a2;
        const double a4 = a2 - h * f1[c] - a3;
        const double a5 = 16.0 * (ym[c] - a1) - 8.0 * a2 - 4.0 * a3 - 2.0 * a4;
        block[c] = a1;
        block[dim + c] = a2;
        block[2 * dim + c] = a3;
        block[3 * dim + c] = a4;
        block[4 * dim + c] = a5;
      }
      t.dense_.insert(t.dense_.end(), block.begin(), block.end());
      t.push_node(radii[i], y1);
      y0 = std::move(y1);
      f0 = std::move(f1);
    }
    termination.radius = radii.back();
    t.termination_ = termination;
    return t;
  }

 private:
  friend class RadialIntegrator;

  void check_range(double r) const {
    if (empty() || !(r >= radii_.front()) || !(r <= radii_.back())) {
      throw Error(ErrorKind::OutOfRange, "radius " + std::to_string(r) + " outside trajectory");
    }
  }

  void push_node(double r, std::span<const double> y) {
    radii_.push_back(r);
    states_.insert(states_.end(), y.begin(), y.end());
  }

  ProblemSpec spec_;
  IntegrationControls controls_;
  std::size_t dim_ = 0;
  std::vector<double> radii_;
  std::vector<double> states_;
  std::vector<double> dense_;
  Termination termination_;
  double max_error_norm_ = 0.0;
  std::size_t rejected_steps_ = 0;
};

namespace detail {

/// Dormand-Prince 5(4) coefficients with Hairer's continuous extension.
struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integrator for one radial problem. Integration can be
/// resumed towards a larger horizon with `advance`.
class RadialIntegrator {
 public:
  RadialIntegrator(const ProblemSpec& spec, const IntegrationControls& controls)
      : traj_(spec, controls) {
    spec.validate();
    controls.validate();
    const std::size_t n = traj_.dim();
    for (auto& k : k_) k.assign(n, 0.0);
    y_.assign(n, 0.0);
    ynew_.assign(n, 0.0);
    tmp_.assign(n, 0.0);
    const StateVector start = taylor_start(spec, controls.r0);
    r_ = start.r;
    y_ = start.y;
    traj_.push_node(r_, y_);
    traj_.termination_ = Termination{TerminationKind::ReachedHorizon, r_};
    if (!rhs(r_, y_, k_[0])) {
      throw Error(ErrorKind::NonfiniteState, "right-hand side undefined at the start radius");
    }
    h_ = initial_step();
  }

  const Trajectory& trajectory() const { return traj_; }
  Trajectory take() { return std::move(traj_); }
  double radius() const { return r_; }
  bool finished() const {
    return traj_.termination_.kind != TerminationKind::ReachedHorizon;
  }

  /// Integrates until r_target or a terminal event.
  const Trajectory& advance(double r_target) {
    if (finished()) return traj_;
    traj_.controls_.r_max = std::max(traj_.controls_.r_max, r_target);
    const auto& ctl = traj_.controls_;
    using DP = detail::DormandPrince;
    const std::size_t n = traj_.dim();
    auto& [k1, k2, k3, k4, k5, k6, k7] = k_;

    while (r_ < r_target) {
      if (steps_ >= ctl.max_steps) {
        traj_.termination_ = Termination{TerminationKind::StepLimit, r_};
        return traj_;
      }
      double h = h_;
      bool hits_target = false;
      if (r_ + h >= r_target || r_target - (r_ + h) < 1e-12 * r_target) {
        h = r_target - r_;
        hits_target = true;
      }
      if (h < ctl.h_min && !hits_target) {
        Termination t{TerminationKind::StepUnderflow, r_};
        t.near_threshold = near_threshold(y_[0]);
        traj_.termination_ = t;
        return traj_;
      }
      ++steps_;
      auto stage = [&](std::vector<double>& out, double c, auto&& combine) {
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y_[i] + h * combine(i);
        return rhs(r_ + c * h, tmp_, out);
      };
      bool ok = stage(k2, DP::c2, [&](std::size_t i) { return DP::a21 * k1[i]; }) &&
                stage(k3, DP::c3, [&](std::size_t i) { return DP::a31 * k1[i] + DP::a32 * k2[i]; }) &&
                stage(k4, DP::c4, [&](std::size_t i) {
                  return DP::a41 * k1[i] + DP::a42 * k2[i] + DP::a43 * k3[i];
                }) &&
                stage(k5, DP::c5, [&](std::size_t i) {
                  return DP::a51 * k1[i] + DP::a52 * k2[i] + DP::a53 * k3[i] + DP::a54 * k4[i];
                }) &&
                stage(k6, 1.0, [&](std::size_t i) {
                  return DP::a61 * k1[i] + DP::a62 * k2[i] + DP::a63 * k3[i] + DP::a64 * k4[i] +
                         DP::a65 * k5[i];
                });
      const double r_new = hits_target ? r_target : r_ + h;
      if (ok) {
        for (std::size_t i = 0; i < n; ++i) {
          ynew_[i] = y_[i] + h * (DP::a71 * k1[i] + DP::a73 * k3[i] + DP::a74 * k4[i] +
                                  DP::a75 * k5[i] + DP::a76 * k6[i]);
        }
        ok = rhs(r_new, ynew_, k7);
      }
      if (!ok) {
        // Stage left the domain of f or overflowed: shrink without consulting the estimate.
        ++traj_.rejected_steps_;
        h_ = 0.25 * h;
        continue;
      }

      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = h * (DP::e1 * k1[i] + DP::e3 * k3[i] + DP::e4 * k4[i] + DP::e5 * k5[i] +
                              DP::e6 * k6[i] + DP::e7 * k7[i]);
        const double sk = ctl.atol + ctl.rtol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
        err += (e / sk) * (e / sk);
      }
      err = std::sqrt(err / static_cast<double>(n));
      if (!std::isfinite(err)) {
        ++traj_.rejected_steps_;
        h_ = 0.25 * h;
        continue;
      }

      // PI step-size control (Hairer & Wanner, dopri5).
      constexpr double safe = 0.9, fac1 = 0.2, fac2 = 10.0, beta = 0.04;
      const double expo1 = 0.2 - beta * 0.75;
      const double fac11 = std::pow(std::max(err, 1e-300), expo1);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(facold_, beta);
        fac = std::clamp(fac / safe, 1.0 / fac2, 1.0 / fac1);
        facold_ = std::max(err, 1e-4);
        const double h_next = h / fac;

        std::vector<double> block(Trajectory::kDenseTerms * n);
        for (std::size_t i = 0; i < n; ++i) {
          const double ydiff = ynew_[i] - y_[i];
          const double bspl = h * k1[i] - ydiff;
          block[i] = y_[i];
          block[n + i] = ydiff;
          block[2 * n + i] = bspl;
          block[3 * n + i] = ydiff - h * k7[i] - bspl;
          block[4 * n + i] = h * (DP::d1 * k1[i] + DP::d3 * k3[i] + DP::d4 * k4[i] +
                                  DP::d5 * k5[i] + DP::d6 * k6[i] + DP::d7 * k7[i]);
        }
        traj_.dense_.insert(traj_.dense_.end(), block.begin(), block.end());
        traj_.push_node(r_new, ynew_);
        traj_.max_error_norm_ = std::max(traj_.max_error_norm_, err);
        r_ = r_new;
        std::swap(y_, ynew_);
        std::swap(k1, k7);
        h_ = rejected_last_ ? std::min(h_next, h) : h_next;
        rejected_last_ = false;
        traj_.termination_.radius = r_;

        if (check_event()) return traj_;
      } else {
        ++traj_.rejected_steps_;
        h_ = h / std::min(1.0 / fac1, fac11 / safe);
        rejected_last_ = true;
      }
    }
    return traj_;
  }

 private:
  bool rhs(double r, std::span<const double> y, std::span<double> dy) const {
    return detail::radial_rhs_into(traj_.spec(), r, y, dy);
  }

  bool exp_case() const { return traj_.spec().nonlinearity.is_exp(); }

  bool near_threshold(double v1) const {
    const auto& c = traj_.controls_;
    return exp_case() ? v1 >= 0.75 * c.u_max : v1 <= 1e4 * c.u_min;
  }

  double rms(std::span<const double> v, std::span<const double> y) const {
    const auto& c = traj_.controls_;
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double sk = c.atol + c.rtol * std::abs(y[i]);
      acc += (v[i] / sk) * (v[i] / sk);
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
  }

  // Hairer's starting step heuristic.
  double initial_step() {
    const auto& c = traj_.controls_;
    const double d0 = rms(y_, y_);
    const double d1 = rms(k_[0], y_);
    double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, 0.1 * (c.r_max - r_));
    for (std::size_t i = 0; i < y_.size(); ++i) tmp_[i] = y_[i] + h0 * k_[0][i];
    if (!rhs(r_ + h0, tmp_, k_[1])) return std::max(c.h_min, 1e-3 * h0);
    for (std::size_t i = 0; i < y_.size(); ++i) ynew_[i] = (k_[1][i] - k_[0][i]);
    const double d2 = rms(ynew_, y_) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, 1e-3 * h0) : std::pow(0.01 / dm, 0.2);
    return std::min(100.0 * h0, h1);
  }

  // Looks for a threshold crossing in the last accepted step.
  bool check_event() {
    const auto& c = traj_.controls_;
    const double v1 = y_[0];
    const bool blowup = exp_case() && v1 >= c.u_max;
    const bool extinct = !exp_case() && v1 <= c.u_min;
    if (!blowup && !extinct) return false;
    const double level = blowup ? c.u_max : c.u_min;
    const std::size_t seg = traj_.size() - 2;
    double lo = traj_.radius(seg), hi = traj_.radius(seg + 1);
    // g(lo) has the "before" sign, g(hi) the "after" sign.
    auto crossed = [&](double r) {
      const double val = traj_.component(r, 0);
      return blowup ? val >= level : val <= level;
    };
    for (int it = 0; it < 200 && hi - lo > 1e-10 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (crossed(mid) ? hi : lo) = mid;
    }
    Termination t{blowup ? TerminationKind::Blowup : TerminationKind::Extinct, hi};
    if (blowup) fit_blowup(t);
    traj_.termination_ = t;
    return true;
  }

  // Fits u ~ c - kappa ln(R - r) over the last 20 nodes by a 1-D search in R.
  void fit_blowup(Termination& t) const {
    const std::size_t count = std::min<std::size_t>(20, traj_.size());
    if (count < 4) return;
    const std::size_t first = traj_.size() - count;
    const double r_last = traj_.last_radius();
    const double span = r_last - traj_.radius(first);
    if (!(span > 0.0)) return;
    auto regress = [&](double big_r, double* kappa) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = first; i < traj_.size(); ++i) {
        const double x = -std::log(big_r - traj_.radius(i));
        const double y = traj_.state(i)[0];
        sx += x; sy += y; sxx += x * x; sxy += x * y;
      }
      const double m = static_cast<double>(count);
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      const double icpt = (sy - slope * sx) / m;
      double sse = 0.0;
      for (std::size_t i = first; i < traj_.size(); ++i) {
        const double x = -std::log(big_r - traj_.radius(i));
        const double res = traj_.state(i)[0] - (icpt + slope * x);
        sse += res * res;
      }
      if (kappa) *kappa = slope;
      return sse;
    };
    // Golden-section over log(R - r_last).
    double a = std::log(1e-12 * (1.0 + r_last)), b = std::log(10.0 * span);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = regress(r_last + std::exp(x1), nullptr), f2 = regress(r_last + std::exp(x2), nullptr);
    for (int it = 0; it < 200 && b - a > 1e-10; ++it) {
      if (f1 < f2) {
        b = x2; x2 = x1; f2 = f1; x1 = b - g * (b - a); f1 = regress(r_last + std::exp(x1), nullptr);
      } else {
        a = x1; x1 = x2; f1 = f2; x2 = a + g * (b - a); f2 = regress(r_last + std::exp(x2), nullptr);
      }
    }
    const double big_r = r_last + std::exp(0.5 * (a + b));
    double kappa = 0.0;
    regress(big_r, &kappa);
    t.fitted_radius = big_r;
    t.fitted_kappa = kappa;
  }

  Trajectory traj_;
  std::array<std::vector<double>, 7> k_;
  std::vector<double> y_, ynew_, tmp_;
  double r_ = 0.0;
  double h_ = 0.0;
  double facold_ = 1e-4;
  bool rejected_last_ = false;
  std::size_t steps_ = 0;
};

/// Integrates from the series start to controls.r_max or a terminal event.
inline Trajectory integrate(const ProblemSpec& spec, const IntegrationControls& controls) {
  RadialIntegrator it(spec, controls);
  it.advance(controls.r_max);
  return it.take();
}

/// Dense-output state at r; throws OutOfRange outside [first node, last node].
inline StateVector evaluate(const Trajectory& traj, double r) { return traj.evaluate(r); }

}  // namespace polyrad
