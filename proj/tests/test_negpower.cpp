#include <gtest/gtest.h>

#include <cmath>

#include "polyrad/negpower.hpp"

using namespace polyrad;

namespace {

IntegrationControls horizon(double r_max) {
  IntegrationControls c;
  c.r_max = r_max;
  return c;
}

std::vector<double> geometric(double lo, double hi, int n) {
  std::vector<double> r;
  for (int i = 0; i <= n; ++i) r.push_back(lo * std::pow(hi / lo, double(i) / n));
  return r;
}

// N=3 synthetic profile u = 1 + c r^k with radial derivatives written out by hand.
Trajectory synthetic_power(double p, double c, double k) {
  auto spec = ProblemSpec::neg_power(3, p, 1.0, 0.0);
  auto state = [=](double r) {
    const double u = 1.0 + c * std::pow(r, k);
    const double du = c * k * std::pow(r, k - 1);
    const double lap = c * k * (k + 1) * std::pow(r, k - 2);
    const double dlap = c * k * (k + 1) * (k - 2) * std::pow(r, k - 3);
    return std::vector<double>{u, du, lap, dlap};
  };
  auto slope = [=](double r) {
    const double d2 = c * k * (k - 1) * std::pow(r, k - 2);
    const double d2lap = c * k * (k + 1) * (k - 2) * (k - 3) * std::pow(r, k - 4);
    auto s = state(r);
    return std::vector<double>{s[1], d2, s[3], d2lap};
  };
  return Trajectory::from_function(spec, geometric(1.0, 1e4, 400), state, slope);
}

}  // namespace

TEST(Extinction, FlatLaplacianGoesExtinct) {
  auto spec = ProblemSpec::neg_power(3, 1.0, 1.0, 0.0);
  auto rec = extinction_cell(1.0, 1.0, 0.0, horizon(200.0));
  ASSERT_EQ(rec.outcome, NegOutcome::Extinct);
  auto tight = integrate(spec, horizon(200.0).tightened(100.0));
  ASSERT_EQ(tight.termination().kind, TerminationKind::Extinct);
  EXPECT_NEAR(rec.rho, tight.termination().radius, 1e-6 * rec.rho);
  // Small-r model: Δu ≈ -r²/(2N) is negative right away.
  ASSERT_TRUE(rec.first_negative_laplacian.has_value());
  EXPECT_LT(*rec.first_negative_laplacian, 1e-3);
  auto early = integrate(spec, horizon(0.2));
  const double r = 0.2;
  EXPECT_NEAR(early.back().u(), 1.0 - std::pow(r, 4) / (8.0 * 3 * 5), 1e-6);
}

TEST(Extinction, SublinearGridAllExtinct) {
  for (double p : {0.25, 0.5, 0.75, 1.0}) {
    auto recs = extinction_scan(p, default_a_grid(), default_b_grid());
    ASSERT_EQ(recs.size(), 24u);
    for (const auto& r : recs) {
      EXPECT_EQ(r.outcome, NegOutcome::Extinct) << "p=" << p << " a=" << r.a << " b=" << r.b;
      EXPECT_TRUE(std::isfinite(r.rho));
      EXPECT_LE(r.min_u, IntegrationControls{}.u_min);
      EXPECT_FALSE(r.falsification);
    }
  }
}

TEST(Extinction, SuperlinearSurvivorGrowsQuadratically) {
  auto rec = extinction_cell(2.0, 1.0, 4.0, horizon(200.0));
  ASSERT_EQ(rec.outcome, NegOutcome::Survived);
  EXPECT_GE(rec.growth_exponent, 4.0 / 3.0);
  EXPECT_NEAR(rec.growth_exponent, 2.0, 0.05);
  EXPECT_FALSE(rec.first_negative_laplacian.has_value());
  EXPECT_EQ(rec.r_max, 200.0);
}

TEST(Extinction, ShortHorizonIsRaisedToSurvivalHorizon) {
  auto recs = extinction_scan(2.0, {1.0}, {4.0}, horizon(10.0));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].outcome, NegOutcome::Survived);
  EXPECT_EQ(recs[0].r_max, kSurvivalHorizon);
}

TEST(Extinction, EscalationResolvesHorizonArtifact) {
  // Extinction near r = 239 is past the survival horizon but inside the doubled one.
  auto rec = extinction_cell(1.0, 16.0, 4.0, horizon(200.0));
  EXPECT_TRUE(rec.escalated);
  EXPECT_EQ(rec.outcome, NegOutcome::Extinct);
  EXPECT_FALSE(rec.falsification);
  EXPECT_GT(rec.rho, 200.0);
  EXPECT_LT(rec.rho, 400.0);
  EXPECT_EQ(rec.r_max, 400.0);
}

TEST(Extinction, UnresolvedCandidateIsFlagged) {
  auto rec = extinction_cell(1.0, 4.0, 32.0, horizon(200.0));
  EXPECT_TRUE(rec.escalated);
  EXPECT_EQ(rec.outcome, NegOutcome::Survived);
  EXPECT_TRUE(rec.falsification);
}

TEST(Extinction, ShortRunIsIndeterminate) {
  auto rec = extinction_cell(1.0, 4.0, 4.0, horizon(1.0));
  EXPECT_EQ(rec.outcome, NegOutcome::Indeterminate);
  EXPECT_FALSE(rec.escalated);
}

TEST(Extinction, RejectsBadInput) {
  EXPECT_THROW(extinction_scan(0.0, {1.0}, {0.0}), Error);
  EXPECT_THROW(extinction_scan(1.0, {-1.0}, {0.0}), Error);
}

TEST(Extinction, StepLimitIsIndeterminate) {
  auto c = horizon(200.0);
  c.max_steps = 3;
  auto rec = extinction_cell(2.0, 1.0, 4.0, c);
  EXPECT_EQ(rec.outcome, NegOutcome::Indeterminate);
}

TEST(LaplacianImplication, NegativeLaplacianEndsExtinct) {
  auto traj = integrate(ProblemSpec::neg_power(3, 1.0, 1.0, -1.0), horizon(200.0));
  auto chk = laplacian_implication_check(traj);
  EXPECT_TRUE(chk.pass);
  EXPECT_TRUE(chk.laplacian_decreasing);
  ASSERT_TRUE(chk.first_negative_laplacian.has_value());
  EXPECT_EQ(*chk.first_negative_laplacian, traj.radius(0));
  EXPECT_EQ(traj.termination().kind, TerminationKind::Extinct);
}

TEST(LaplacianImplication, SurvivorKeepsPositiveLaplacian) {
  auto traj = integrate(ProblemSpec::neg_power(3, 2.0, 1.0, 4.0), horizon(200.0));
  auto chk = laplacian_implication_check(traj);
  EXPECT_TRUE(chk.pass);
  EXPECT_FALSE(chk.first_negative_laplacian.has_value());
  for (std::size_t i = 0; i < traj.size(); ++i) EXPECT_GT(traj.state(i)[2], 0.0);
}

TEST(LaplacianImplication, LaplacianDecreasingOnEveryGridTrajectory) {
  for (double p : {0.5, 1.0, 2.0}) {
    for (double b : default_b_grid()) {
      auto traj = integrate(ProblemSpec::neg_power(3, p, 1.0, b), horizon(200.0));
      EXPECT_TRUE(laplacian_implication_check(traj).pass) << p << " " << b;
    }
  }
}

TEST(LaplacianImplication, DetectsViolation) {
  // Constant Laplacian is not strictly decreasing.
  auto traj = synthetic_power(1.0, 1.0, 2.0);
  EXPECT_FALSE(laplacian_implication_check(traj).laplacian_decreasing);
}

TEST(GrowthBounds, SurvivorSatisfiesBoth) {
  auto traj = integrate(ProblemSpec::neg_power(3, 2.0, 1.0, 4.0), horizon(200.0));
  auto g = growth_bounds_check(traj);
  EXPECT_TRUE(g.lower_ok);
  EXPECT_TRUE(g.upper_ok);
  EXPECT_TRUE(g.pointwise_ok);
  EXPECT_GT(g.c_low, 0.0);
  EXPECT_GT(g.kappa, 0.0);
  EXPECT_NEAR(g.exponent, 4.0 / 3.0, 1e-15);
}

TEST(GrowthBounds, SyntheticQuadraticHoldsBoth) {
  auto g = growth_bounds_check(synthetic_power(2.0, 1.0, 2.0));
  EXPECT_TRUE(g.lower_ok);
  EXPECT_TRUE(g.upper_ok);
  EXPECT_TRUE(g.pointwise_ok);
  // u / r^{4/3} is smallest at the start of the last decade.
  EXPECT_NEAR(g.c_low, (1.0 + 1e6) / std::pow(1e3, 4.0 / 3.0), 1e-9 * g.c_low);
  EXPECT_LE(g.upper_ratio, 1.0);
  EXPECT_GT(g.kappa, 0.0);
}

TEST(GrowthBounds, SyntheticLinearFailsLowerBound) {
  auto g = growth_bounds_check(synthetic_power(1.0, 1.0, 1.0));
  EXPECT_FALSE(g.lower_ok);
  EXPECT_TRUE(g.upper_ok);
  EXPECT_NEAR(g.slope, 1.0, 1e-3);
}

TEST(GrowthBounds, ExtinctTrajectoryThrows) {
  auto traj = integrate(ProblemSpec::neg_power(3, 1.0, 1.0, 0.0), horizon(200.0));
  try {
    growth_bounds_check(traj);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSurvived);
  }
}

TEST(ComparisonLimit, ClosedFormN3) {
  auto res = comparison_limit_check(6.0, 1.0, 3, {1e3, 2e3});
  EXPECT_DOUBLE_EQ(res.target, -1.0);
  for (const auto& s : res.samples) {
    EXPECT_NEAR(s.value, -(s.r - std::atan(s.r)) / s.r, 1e-12);
  }
  EXPECT_LE(res.samples[0].deviation, 1e-2);
  ASSERT_EQ(res.ratios.size(), 1u);
  EXPECT_NEAR(res.ratios[0], 0.5, 0.1);
}

TEST(ComparisonLimit, Targets) {
  EXPECT_DOUBLE_EQ(comparison_limit_check(8.0, 1.0, 4, {10.0}).target, -0.5);
  const double big = comparison_limit_check(1e12, 1.0, 3, {10.0}).target;
  EXPECT_LT(big, 0.0);
  EXPECT_GT(big, -1e-11);
  EXPECT_THROW(comparison_limit_check(1.0, 1.0, 2, {10.0}), Error);
}

TEST(ComparisonLimit, N4ConvergesFirstOrder) {
  auto res = comparison_limit_check(8.0, 1.0, 4, {500.0, 1000.0, 2000.0});
  for (double q : res.ratios) EXPECT_LT(q, 0.6);
}

TEST(PolynomialObstruction, NegativeFourthDerivativeForcesNegativity) {
  auto quartic = polynomial_obstruction({100.0, 0.0, 0.0, 0.0, -1.0});
  EXPECT_TRUE(quartic.fourth_derivative_negative);
  EXPECT_TRUE(quartic.unbounded_below);
  EXPECT_TRUE(quartic.consistent);
  auto sextic = polynomial_obstruction({5.0, 0.0, 0.0, 0.0, -1.0, 0.0, -1.0});
  EXPECT_TRUE(sextic.fourth_derivative_negative);
  EXPECT_TRUE(sextic.consistent);
  // 360 x² - 24 changes sign: not a test case for the obstruction.
  auto mixed = polynomial_obstruction({1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0});
  EXPECT_FALSE(mixed.fourth_derivative_negative);
  auto positive = polynomial_obstruction({1.0, 0.0, 1.0});
  EXPECT_FALSE(positive.fourth_derivative_negative);
  EXPECT_FALSE(positive.unbounded_below);
}
