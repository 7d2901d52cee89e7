// One line per acceptance criterion. Exit status is nonzero if any criterion fails, except
// criterion 11's Beta target, whose stated value (64) is twice the exact integral and is
// reported red without failing the run.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "polyrad/polyrad.hpp"

#ifndef POLYRAD_CLI
#error "POLYRAD_CLI must name the CLI executable"
#endif

using namespace polyrad;
namespace fs = std::filesystem;

namespace {

int failures = 0;
int known_red = 0;

void line(int id, bool pass, const std::string& what, double seconds, bool expected_red = false) {
  std::printf("[%s] %2d %s (%.2f s)%s\n", pass ? "PASS" : "FAIL", id, what.c_str(), seconds,
              !pass && expected_red ? " [known red, see README]" : "");
  if (!pass) (expected_red ? known_red : failures)++;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(POLYRAD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "polyrad_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void criterion_1(const fs::path& dir) {
  Timer t;
  const auto out = dir / "shoot4";
  const int code = run_cli("shoot --dim 4 --rmax 40 --tol-beta 1e-6 --out " + out.string());
  if (code != 0) {
    line(1, false, "N=4 anchor: shoot exited with " + std::to_string(code), t.seconds());
    return;
  }
  const auto res = io::separatrix_from_json(io::read_json(out / "separatrix.json"));
  const auto traj = io::read_trajectory(out / "trajectory");
  double sup = 0.0;
  for (const auto& s : traj.nodes) {
    if (s.r <= 20.0) sup = std::max(sup, std::abs(s.u() - (-4.0 * std::log1p(s.r * s.r / (8.0 * std::sqrt(6.0))))));
  }
  const double err = std::abs(res.beta0_est + 4.0 / std::sqrt(6.0));
  const double secs = t.seconds();
  line(1, err <= 1e-4 && sup <= 1e-5 && secs < 30.0,
       fmt("N=4 anchor: beta0 = %.10f, |beta0 + 4/sqrt6| = %.2e <= 1e-4, sup|u - closed form| on [0,20] = %.2e <= 1e-5",
           res.beta0_est, err, sup),
       secs);
}

void from_check(int id, const std::string& name, const std::string& label,
                const std::function<std::string(const CheckResult&)>& describe, double limit_s = 600.0) {
  Timer t;
  const auto r = checks::run(name);
  const double secs = t.seconds();
  line(id, r.pass && secs < limit_s, label + ": " + (r.detail.empty() ? "" : r.detail + " ") + describe(r), secs);
}

void criterion_11() {
  Timer t;
  const auto r = checks::run("quadrature_oracle");
  const double value = r.metric("beta_integral");
  const double gamma_err = std::max({std::abs(r.metric("alpha1") + 1.0), std::abs(r.metric("alpha2") - 3.0),
                                     std::abs(r.metric("alpha3") + 4.0)});
  const bool gamma_ok = gamma_err <= 1e-8;
  const bool stated_ok = std::abs(value - 64.0) <= 1e-8;
  line(11, stated_ok && gamma_ok,
       fmt("quadrature oracle: Beta integral = %.12f vs stated 64 (exact B(2,2)/(2c^2) = %.12f, |diff| = %.1e); "
           "Gamma case max error %.1e <= 1e-8",
           value, r.metric("beta_exact"), std::abs(value - r.metric("beta_exact")), gamma_err),
       t.seconds(), gamma_ok && std::abs(value - r.metric("beta_exact")) <= 1e-8);
}

void criterion_12(const fs::path& dir) {
  Timer t;
  const auto a = dir / "verify_a", b = dir / "verify_b";
  const int ca = run_cli("verify --out " + a.string());
  const int cb = run_cli("verify --out " + b.string());
  bool same = false;
  std::size_t n = 0;
  if (fs::exists(a / "verify.json") && fs::exists(b / "verify.json")) {
    auto ja = io::read_json(a / "verify.json"), jb = io::read_json(b / "verify.json");
    n = ja["checks"].size();
    ja["metadata"].erase("timestamp");
    jb["metadata"].erase("timestamp");
    same = ja.dump(2) == jb.dump(2);
  }
  line(12, ca == 0 && cb == 0 && same,
       fmt("determinism: two verify runs (%g checks, exit codes %g/%g) byte-identical apart from the timestamp: ",
           double(n), ca, cb) + (same ? "yes" : "no"),
       t.seconds());
}

}  // namespace

int main() {
  const auto dir = workdir();
  criterion_1(dir);
  from_check(2, "log_limit_n5", "N=5 log limit", [](const CheckResult& r) {
    return fmt("estimate %.6f vs ln 24 = %.6f, gap %.4f <= 5e-2, gap at doubled horizon %.4f", r.metric("estimate"),
               r.metric("target"), r.metric("gap_r40"), r.metric("gap_r80"));
  }, 60.0);
  from_check(3, "expansion_n3", "N=3 expansion", [](const CheckResult& r) {
    return fmt("alpha = (%.8f, %.8f, %.8f), |a - 2 alpha1| = %.1e", r.metric("alpha1"), r.metric("alpha2"),
               r.metric("alpha3"), r.metric("a_gap")) +
           fmt(" within bars %.1e; residual ratios 40->60 %.1e, 60->80 %.1e", r.metric("a_error_bars"),
               r.metric("ratio_40_60"), r.metric("ratio_60_80"));
  }, 120.0);
  from_check(4, "sign_crossing", "sign crossing implies blowup", [](const CheckResult& r) {
    return fmt("%g trajectories (m in {1,2}, N in 2..5), %g crossings, %g counterexamples", r.metric("trajectories"),
               r.metric("crossings"), r.metric("counterexamples"));
  });
  from_check(5, "n2_scan", "N=2 universal blowup", [](const CheckResult& r) {
    return fmt("%g betas in [-100,10] + %g order-2 lattices, %g without finite blowup, largest ln R = %.1f",
               r.metric("betas"), r.metric("lattices"), r.metric("not_blowup"), r.metric("max_log_R"));
  });
  from_check(6, "lower_bound", "lower bound u >= beta r^2/(2N)", [](const CheckResult& r) {
    return fmt("%g trajectories, min [u - beta r^2/(2N) + 1e-8(1+r^2)] = %.2e >= 0", r.metric("trajectories"),
               r.metric("worst_margin"));
  });
  from_check(7, "scaling", "scaling lambda = 2", [](const CheckResult& r) {
    return fmt("sup errors N=2 %.1e, N=3 %.1e, N=4 %.1e <= 1e-6", r.metric("error_n2"), r.metric("error_n3"),
               r.metric("error_n4"));
  });
  from_check(8, "supersolution", "supersolution eps = 0.1", [](const CheckResult& r) {
    return fmt("b = ln max psi = %.10f, worst margin %.1e >= -1e-10; b - 1 worst margin %.3f fails", r.metric("b"),
               r.metric("worst_margin"), r.metric("worst_margin_b_minus_1"));
  });
  from_check(9, "extinction", "extinction scans", [](const CheckResult& r) {
    return fmt("p <= 1: %g extinct, %g survived after escalation; p = 2: %g survivors, exponent %.4f in [4/3, 2.2]",
               r.metric("sublinear_extinct"), r.metric("sublinear_survived"), r.metric("p2_survivors"),
               r.metric("p2_growth_exponent"));
  });
  from_check(10, "comparison_limit", "comparison limit", [](const CheckResult& r) {
    return fmt("r W'(1000) = %.6f vs %.0f, deviation %.2e <= 1e-2, ratio %.4f in 0.5 +- 0.1", r.metric("value_r1000"),
               r.metric("target"), r.metric("deviation_r1000"), r.metric("ratio"));
  });
  criterion_11();
  criterion_12(dir);
  std::printf("%d/12 criteria pass, %d known red, %d unexpected failures\n", 12 - failures - known_red, known_red,
              failures);
  return failures == 0 ? 0 : 1;
}
