#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "cli_app.hpp"

using namespace polyrad;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "polyrad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("polyrad_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST(Cli, MissingDimensionIsConfigError) {
  const auto r = invoke({"integrate", "--out", scratch("nodim") + "/o"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'dim'"), std::string::npos);
}

TEST(Cli, BadFlagsAreConfigErrors) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"integrate", "--dim", "x"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"integrate", "--dim", "3", "--rtol", "-1", "--out", scratch("rtol") + "/o"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, IntegrateEmitsFilesThatReproduceTheEndpoint) {
  const auto dir = scratch("integrate");
  const auto r = invoke({"integrate", "--dim", "4", "--beta", "-1.6329931618554521", "--out", dir + "/o"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = io::read_trajectory(dir + "/o/trajectory");
  const auto traj = integrate(ProblemSpec::exp_biharmonic(4, -1.6329931618554521), IntegrationControls{});
  EXPECT_EQ(table.back(), traj.back());
  EXPECT_EQ(table.termination.kind, TerminationKind::ReachedHorizon);
}

TEST(Cli, OutputCollisionNeedsForce) {
  const auto dir = scratch("collide") + "/o";
  ASSERT_EQ(invoke({"integrate", "--dim", "3", "--beta", "-2", "--out", dir}).code, 0);
  const auto again = invoke({"integrate", "--dim", "3", "--beta", "-2", "--out", dir});
  EXPECT_EQ(again.code, 2);
  EXPECT_NE(again.err.find("--force"), std::string::npos);
  EXPECT_EQ(invoke({"integrate", "--dim", "3", "--beta", "-2", "--out", dir, "--force"}).code, 0);
}

TEST(Cli, IntegrationFailureIsNumericError) {
  const auto dir = scratch("fail");
  io::write_text(dir + "/c.json", R"({"command": "integrate", "dim": 3, "beta": -2, "max_steps": 3})");
  EXPECT_EQ(invoke({"integrate", "--config", dir + "/c.json", "--out", dir + "/o"}).code, 3);
}

TEST(Cli, ConfigOverridesFlags) {
  const auto dir = scratch("override");
  io::write_text(dir + "/c.json", R"({"command": "integrate", "dim": 4, "rmax": 5})");
  ASSERT_EQ(invoke({"integrate", "--dim", "3", "--rmax", "7", "--config", dir + "/c.json", "--out", dir + "/o"}).code, 0);
  const auto table = io::read_trajectory(dir + "/o/trajectory");
  EXPECT_EQ(table.spec.dim, 4);
  EXPECT_EQ(table.controls.r_max, 5.0);
  io::write_text(dir + "/wrong.json", R"({"command": "shoot"})");
  EXPECT_EQ(invoke({"integrate", "--dim", "3", "--config", dir + "/wrong.json", "--out", dir + "/p"}).code, 2);
  io::write_text(dir + "/unknown.json", R"({"command": "integrate", "colour": 1})");
  EXPECT_EQ(invoke({"integrate", "--config", dir + "/unknown.json", "--out", dir + "/q"}).code, 2);
}

TEST(Cli, ShootFourRecoversClosedForm) {
  const auto dir = scratch("shoot4");
  const auto r = invoke({"shoot", "--dim", "4", "--tol", "1e-6", "--out", dir + "/o"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = io::separatrix_from_json(io::read_json(dir + "/o/separatrix.json"));
  EXPECT_NEAR(res.beta0_est, -4.0 / std::sqrt(6.0), 1e-4);
  EXPECT_EQ(res.r_max, 40.0);
  EXPECT_EQ(res.tol_beta, 1e-6);
}

TEST(Cli, ShootInThePlaneIsBracketFailure) {
  EXPECT_EQ(invoke({"shoot", "--dim", "2", "--out", scratch("shoot2") + "/o"}).code, 4);
}

TEST(Cli, ShootIsDeterministic) {
  const auto dir = scratch("shoot3");
  ASSERT_EQ(invoke({"shoot", "--dim", "3", "--out", dir + "/a"}).code, 0);
  ASSERT_EQ(invoke({"shoot", "--dim", "3", "--out", dir + "/b"}).code, 0);
  for (const char* f : {"separatrix.json", "trajectory.csv", "trajectory.json"}) {
    EXPECT_EQ(io::read_text(dir + "/a/" + f), io::read_text(dir + "/b/" + f)) << f;
  }
}

TEST(Cli, ExpandThree) {
  const auto dir = scratch("expand3");
  ASSERT_EQ(invoke({"expand", "--dim", "3", "--out", dir + "/o"}).code, 0);
  const auto j = io::read_json(dir + "/o/expansion.json");
  EXPECT_TRUE(j["expansion"]["a_consistent"].get<bool>());
  const auto rep = io::expansion_from_json(j["expansion"]);
  EXPECT_LT(rep.alpha1.value, 0.0);
  EXPECT_TRUE(fs::exists(dir + "/o/residuals.csv"));
}

TEST(Cli, ExpandBlowupInputIsNotSeparatrix) {
  const auto r = invoke({"expand", "--dim", "3", "--beta", "0", "--out", scratch("expandbad") + "/o"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("NotSeparatrix"), std::string::npos);
}

TEST(Cli, ExpandFiveReportsLogTarget) {
  const auto dir = scratch("expand5");
  ASSERT_EQ(invoke({"expand", "--dim", "5", "--out", dir + "/o"}).code, 0);
  const auto lim = io::log_limit_from_json(io::read_json(dir + "/o/expansion.json")["log_limit"]);
  EXPECT_NEAR(lim.target, std::log(24.0), 1e-15);
  EXPECT_NEAR(lim.estimate, lim.target, 5e-2);
}

TEST(Cli, ScanAndNegPowerEmitCsv) {
  const auto dir = scratch("scans");
  ASSERT_EQ(invoke({"scan-n2", "--beta", "-3", "--out", dir + "/n2"}).code, 0);
  const auto rows = io::parse_scan_csv(io::read_text(dir + "/n2/scan.csv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].kind, Outcome::Blowup);

  ASSERT_EQ(invoke({"negpower-scan", "--p", "0.5", "--out", dir + "/np"}).code, 0);
  const auto recs = io::parse_negpower_csv(io::read_text(dir + "/np/negpower.csv"));
  ASSERT_EQ(recs.size(), 24u);
  for (const auto& r : recs) EXPECT_EQ(r.outcome, NegOutcome::Extinct);
  EXPECT_EQ(io::read_json(dir + "/np/falsifications.json")["count"], 0);
  EXPECT_EQ(invoke({"negpower-scan", "--p", "-1", "--out", dir + "/bad"}).code, 2);
}

TEST(Cli, VerifyEmptyAndUnknown) {
  const auto dir = scratch("verify_empty");
  io::write_text(dir + "/c.json", R"({"command": "verify", "checks": []})");
  ASSERT_EQ(invoke({"verify", "--config", dir + "/c.json", "--out", dir + "/o"}).code, 0);
  EXPECT_TRUE(io::read_json(dir + "/o/verify.json")["checks"].empty());
  EXPECT_EQ(invoke({"verify", "--checks", "scaling,nonsense", "--out", dir + "/p"}).code, 2);
}

TEST(Cli, VerifyFailureNamesChecks) {
  auto& reg = checks::registry();
  reg.emplace_back("always_fails", [] { return checks::named("always_fails"); });
  const auto r = invoke({"verify", "--checks", "scaling,always_fails", "--out", scratch("verify_fail") + "/o"});
  reg.pop_back();
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("always_fails"), std::string::npos);
  EXPECT_EQ(r.err.find("scaling"), std::string::npos);
}

TEST(Cli, VerifyIsDeterministicApartFromTimestamp) {
  const auto dir = scratch("verify_twice");
  ASSERT_EQ(invoke({"verify", "--out", dir + "/a"}).code, 0);
  ASSERT_EQ(invoke({"verify", "--out", dir + "/b"}).code, 0);
  const auto a = io::read_json(dir + "/a/verify.json"), b = io::read_json(dir + "/b/verify.json");
  EXPECT_TRUE(a["metadata"].contains("timestamp"));
  EXPECT_EQ(cli::comparable(a), cli::comparable(b));
  EXPECT_EQ(a["checks"].size(), checks::default_suite().size());
}
