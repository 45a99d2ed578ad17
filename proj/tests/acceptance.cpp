// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include "checks.hpp"

#include <chrono>
#include <cstdio>
#include <string>

namespace {

int failures = 0;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(int id, const char* title, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

void criterion1() {
  Stopwatch sw;
  const auto errs = checks::conditional_ratio_errors();
  const double worst = checks::max_value(errs);
  std::string names;
  for (const auto& e : errs) names += (names.empty() ? "" : ",") + e.name;
  const double t = sw.seconds();
  report(1, "conditional-correctness", worst < 1e-8 && t < 10.0,
         fmt("max |log-ratio error| %.2e over ", worst) + names + fmt(" (tol 1e-8); %.1f s (limit 10 s)", t));
}

void criterion2() {
  Stopwatch sw;
  const auto mc = checks::estep_vs_monte_carlo();
  auto [mid, data] = checks::sim1_midrun_state();
  const double g_tiny = checks::max_value(checks::mstep_gradients(oracle::tiny_state(), oracle::tiny_data()));
  const double g_sim = checks::max_value(checks::mstep_gradients(mid, data));
  const double drop = checks::em_worst_decrease();
  const double t = sw.seconds();
  const bool pass = mc.max_z < 3.0 && g_tiny < 1e-4 && g_sim < 1e-4 && drop <= 1e-6 && t < 120.0;
  report(2, "E-step/M-step", pass,
         fmt("E-step max %.2f SE over %.0f moments (tol 3); M-step max |grad| %.1e tiny, %.1e Sim1 (tol 1e-4); ",
             mc.max_z, static_cast<double>(mc.compared), g_tiny, g_sim) +
             fmt("worst EM decrease %.1e (slack 1e-6); %.1f s (limit 120 s)", drop, t));
}

void criterion3() {
  auto [mid, data] = checks::sim1_midrun_state();
  const double gap = std::max(checks::px_likelihood_gap(oracle::tiny_state(), oracle::tiny_data()),
                              checks::px_likelihood_gap(mid, data));
  const bool bitwise = checks::px_reduces_to_em();
  report(3, "PX invariance", gap < 1e-8 && bitwise,
         fmt("log-likelihood change under R-update %.2e (tol 1e-8); n_px_iter=0 bitwise equal to EM: ", gap) +
             (bitwise ? "yes" : "no"));
}

void criterion4() {
  Stopwatch sw;
  const auto r = checks::sim1_recovery();
  const double t = sw.seconds();
  const bool pass = r.px_em >= 0.70 && r.mcmc_em >= 0.70 && r.px_em >= r.em && t < 600.0;
  report(4, "Sim1 structure recovery", pass,
         fmt("mean rate EM %.3f, MCMC-EM %.3f, PX-EM %.3f over 20 runs (need PX, MCMC >= 0.70, PX >= EM); "
             "%.0f s (limit 600 s)",
             r.em, r.mcmc_em, r.px_em, t));
}

void criterion5() {
  Stopwatch sw;
  const auto r = checks::sim1_prediction();
  const double t = sw.seconds();
  report(5, "Sim1 prediction", r.best_mse >= 0.82 && r.best_mse <= 0.95 && t < 900.0,
         fmt("best-of-20 MCMC-EM MSE %.4f (band [0.82, 0.95]); true-parameter MSE %.4f; %.0f s (limit 900 s)",
             r.best_mse, r.oracle_mse, t));
}

void criterion6() {
  const auto r = checks::sim2_separation();
  const double frac = static_cast<double>(r.exact) / r.runs;
  report(6, "Sim2 sparse/dense separation", frac >= 0.5 && r.dsi_dense_vs_dense < r.dsi_dense_vs_sparse,
         fmt("exact activity pattern in %.0f/%.0f runs (need >= 50%%); DSI dense-vs-dense %.4f < dense-vs-sparse %.4f",
             r.exact, r.runs, r.dsi_dense_vs_dense, r.dsi_dense_vs_sparse));
}

void criterion7() {
  Stopwatch sw;
  const auto m = checks::metric_properties();
  const double ssi_err = std::max({m.ssi_permutation, m.ssi_sign, m.ssi_scale});
  const double t = sw.seconds();
  const bool pass = ssi_err < 1e-12 && m.dsi_rotation < 1e-10 && m.woodbury_vs_dense < 1e-10 &&
                    m.partial_corr < 1e-12 && t < 30.0;
  report(7, "metric properties", pass,
         fmt("SSI perm/sign/scale %.1e (tol 1e-12); DSI rotation %.1e (tol 1e-10); Woodbury vs dense %.1e "
             "(tol 1e-10); partial correlation %.1e (tol 1e-12)",
             ssi_err, m.dsi_rotation, m.woodbury_vs_dense, m.partial_corr) +
             fmt("; %.1f s (limit 30 s)", t));
}

void criterion8() {
  Stopwatch sw;
  const auto r = checks::gig_moment_checks();
  double worst = 0.0;
  for (const auto& g : r) worst = std::max(worst, g.mean_z);
  const double t = sw.seconds();
  report(8, "GIG sampler", worst < 3.0 && t < 60.0,
         fmt("max |mean - Bessel mean| %.2f SE over %.0f triples at 1e5 draws (tol 3); %.1f s (limit 60 s)", worst,
             static_cast<double>(r.size()), t));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures;
}
