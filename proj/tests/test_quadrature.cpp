#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "polyrad/quadrature.hpp"

using namespace polyrad;

namespace {

std::vector<double> uniform(double a, double b, int n) {
  std::vector<double> r(n + 1);
  for (int i = 0; i <= n; ++i) r[i] = a + (b - a) * i / n;
  return r;
}

std::vector<double> geometric(double a, double b, int per_decade) {
  std::vector<double> r;
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double x = a; x < b; x *= step) r.push_back(x);
  r.push_back(b);
  return r;
}

// Trajectory whose v1 is the given profile; higher components are irrelevant here.
Trajectory synthetic(std::function<double(double)> u, std::function<double(double)> du,
                     const std::vector<double>& radii) {
  return Trajectory::from_function(
      ProblemSpec::exp_biharmonic(3, 0.0), radii,
      [u, du](double r) { return std::vector<double>{u(r), du(r), 0.0, 0.0}; },
      [du](double r) { return std::vector<double>{du(r), 0.0, 0.0, 0.0}; });
}

Trajectory closed_form_profile(double r_max) {
  std::vector<double> radii{0.0};
  for (double r : geometric(1e-3, r_max, 400)) radii.push_back(r);
  return Trajectory::from_function(
      ProblemSpec::exp_biharmonic(4, closed_form_n4::kBeta0), radii,
      [](double r) { return closed_form_n4::state(r).y; },
      [](double r) {
        return std::vector<double>{closed_form_n4::derivative(r, 1), closed_form_n4::derivative(r, 2),
                                   closed_form_n4::laplacian_derivative(r),
                                   std::exp(closed_form_n4::u(r)) - 3.0 * closed_form_n4::laplacian_derivative(r) / std::max(r, 1e-300)};
      });
}

// ∫_0^∞ t³ (1 + c t²)^{-4} dt: with s = c t² this is B(2, 2) / (2c²) = 1/(12c²) = 32.
double beta_oracle() {
  const double c = closed_form_n4::kScale;
  return std::beta(2.0, 2.0) / (2.0 * c * c);
}

}  // namespace

TEST(QuadratureWeighted, ConstantProfileWithoutTail) {
  auto traj = synthetic([](double) { return 0.0; }, [](double) { return 0.0; }, uniform(0.0, 1.0, 10));
  auto q = quadrature_weighted(traj, 2, TailPolicy::None);
  EXPECT_NEAR(q.value, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(q.tail, 0.0);
}

TEST(QuadratureWeighted, BetaIntegralOnClosedForm) {
  auto traj = closed_form_profile(1e4);
  auto q = quadrature_weighted(traj, 3);
  EXPECT_EQ(q.tail_fit.kind, TailModelKind::PowerLaw);
  EXPECT_NEAR(q.value, beta_oracle(), 1e-8);
  EXPECT_LE(std::abs(q.value - beta_oracle()), q.error_bound);
}

TEST(QuadratureWeighted, BetaIntegralOnIntegratedSeparatrix) {
  IntegrationControls c;
  c.r_max = 40.0;
  for (double factor : {1.0, 10.0}) {
    auto traj = integrate(ProblemSpec::exp_biharmonic(4, closed_form_n4::kBeta0), c.tightened(factor));
    auto q = quadrature_weighted(traj, 3);
    EXPECT_LE(std::abs(q.value - beta_oracle()), q.error_bound) << "tightening " << factor;
    EXPECT_LT(q.error_bound, 0.05);
  }
}

TEST(QuadratureWeighted, GammaMomentsOfLinearProfile) {
  auto traj = synthetic([](double r) { return -r; }, [](double) { return -1.0; }, uniform(0.0, 60.0, 600));
  for (int k : {2, 3, 4}) {
    auto q = quadrature_weighted(traj, k);
    EXPECT_EQ(q.tail_fit.kind, TailModelKind::Exponential);
    EXPECT_NEAR(q.tail_fit.slope, -1.0, 1e-9);
    EXPECT_NEAR(q.value, std::tgamma(k + 1.0), 1e-8) << "k=" << k;
  }
}

TEST(QuadratureWeighted, GrowingTailIsRejected) {
  auto traj = synthetic([](double r) { return 0.1 * r; }, [](double) { return 0.1; }, uniform(0.0, 10.0, 50));
  try {
    quadrature_weighted(traj, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TailNotIntegrable);
  }
}

TEST(QuadratureWeighted, TailModelAgreesWithExactExponentialMoments) {
  TailFit fit{TailModelKind::Exponential, -2.0, 0.5, 3.0, -2.0};
  // ∫_3^∞ t² e^{0.5 - 2t} dt = e^{0.5} e^{-6} (9/2 + 6/4 + 2/8)
  const double exact = std::exp(0.5 - 6.0) * (4.5 + 1.5 + 0.25);
  EXPECT_NEAR(tail_moment(fit, 2, 3.0), exact, 1e-15);
  TailFit pw{TailModelKind::PowerLaw, -8.0, std::log(2.0), 10.0, -0.1};
  EXPECT_NEAR(tail_moment(pw, 3, 10.0), 2.0 * std::pow(10.0, -4.0) / 4.0, 1e-18);
}

TEST(QuadratureWeighted, RequiresHorizon) {
  IntegrationControls c;
  c.r_max = 100.0;
  auto traj = integrate(ProblemSpec::exp_biharmonic(3, 0.0), c);
  ASSERT_EQ(traj.termination().kind, TerminationKind::Blowup);
  EXPECT_THROW(quadrature_weighted(traj, 2), Error);
}
