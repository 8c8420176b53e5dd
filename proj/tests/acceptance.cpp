// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [--threads K]

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>
#include <thread>

#include "modfuse/report.hpp"
#include "modfuse/scenario.hpp"
#include "suites.hpp"

using namespace modfuse;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double mean_of(const StudySummary& s, MethodVariant m) { return s.find(m)->errors.mean; }

std::string results_csv(const StudyResult& r) {
  std::ostringstream os;
  write_results_csv(os, result_rows(r.trials));
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--threads") == 0) threads = std::atoi(argv[i + 1]);
  }

  // Criteria 1, 2 and 9 share one default 2000-trial study.
  ScenarioConfig cfg;
  cfg.n_trials = 2000;
  cfg.seed = 0;
  const StudyResult study = run_study(cfg, {threads, std::nullopt});
  const StudySummary& sum = study.summary;

  {
    struct Band {
      MethodVariant m;
      double lo, hi;
    };
    const Band bands[] = {{MethodVariant::FSafe, 1.8, 2.8},
                          {MethodVariant::Joint, 1.8, 2.9},
                          {MethodVariant::FKalman, 2.1, 3.3},
                          {MethodVariant::Safe, 5.0, 9.5},
                          {MethodVariant::Kalman, 5.0, 9.7}};
    bool ok = true;
    std::string detail = "mean e_l(T) over 2000 trials:";
    for (const auto& b : bands) {
      const auto& e = sum.find(b.m)->errors;
      ok = ok && e.mean >= b.lo && e.mean <= b.hi;
      detail += " " + std::string(method_name(b.m)) + fmt("=%.3f in [%.1f,%.1f]", e.mean, b.lo, b.hi);
      if (e.n_failed > 0) detail += fmt(" (%.0f failed)", static_cast<double>(e.n_failed));
    }
    report(1, ok, detail);
  }

  {
    const double fsafe = mean_of(sum, MethodVariant::FSafe), fkalman = mean_of(sum, MethodVariant::FKalman);
    const double safe = mean_of(sum, MethodVariant::Safe), kalman = mean_of(sum, MethodVariant::Kalman);
    const double joint = mean_of(sum, MethodVariant::Joint);
    const double rel = std::abs(fsafe - joint) / joint;
    const bool ok = fsafe < fkalman && safe > 2 * fsafe && kalman > 2 * fsafe && rel < 0.25;
    report(2, ok,
           fmt("fsafe < fkalman (%.3f < %.3f), safe and kalman > 2 fsafe (%.3f, ", fsafe, fkalman, safe) +
               fmt("%.3f > %.3f), |fsafe - joint|/joint = %.3f < 0.25", kalman, 2 * fsafe, rel));
  }

  {
    const auto w = suites::ci_suite(1000, 101);
    const bool ok = w.info <= 1e-10 && w.mean_forms <= 1e-10 && w.det_excess <= 1e-12;
    report(3, ok,
           fmt("1000 CI cases, worst information rel %.2e, mean-form rel %.2e, ", w.info, w.mean_forms) +
               fmt("det(P+) - min det = %.2e (tol 1e-10, 1e-10, 1e-12)", w.det_excess));
  }

  {
    const double w = suites::marginal_cost_suite(100, 202);
    report(4, w <= 1e-8, fmt("100 linear maps, worst marginal-cost rel %.2e (tol 1e-8)", w));
  }

  {
    const auto w = suites::sherman_morrison_suite(1000, 303);
    const bool ok = w.landmark <= 1e-8 && w.robot <= 1e-8 && w.joint <= 1e-8;
    report(5, ok, fmt("1000 cases, rank-1 vs dense rel: landmark %.2e, robot %.2e, joint %.2e (tol 1e-8)",
                      w.landmark, w.robot, w.joint));
  }

  {
    const auto w = suites::jacobian_suite(100, 404);
    const bool ok = std::max({w.a, w.b, w.h_r, w.h_l, w.joint}) <= 1e-5;
    report(6, ok, fmt("100 states, finite-difference error A %.1e, B %.1e, H_r %.1e", w.a, w.b, w.h_r) +
                      fmt(", H_l %.1e, joint H %.1e (tol 1e-5)", w.h_l, w.joint));
  }

  {
    ScenarioConfig quiet;
    quiet.n_trials = 200;
    quiet.seed = 7;
    quiet.noise_std_override = 1e-12;
    quiet.exact_initial_estimates = true;
    const StudyResult r = run_study(quiet, {threads, std::nullopt});
    double worst = 0.0;
    int failed = 0;
    for (const auto& t : r.trials) {
      for (const auto& o : t.outcomes) {
        if (o.failed) {
          ++failed;
          continue;
        }
        for (double e : o.landmark_error_history) worst = std::max(worst, e);
      }
    }
    report(7, failed == 0 && worst < 1e-6,
           fmt("noise stds 1e-12, exact start, 200 trials x 5 methods: max_k e_l(k) = %.2e (< 1e-6), "
               "%.0f failed",
               worst, failed));
  }

  {
    ScenarioConfig small;
    small.n_trials = 50;
    small.seed = 11;
    const std::string one = results_csv(run_study(small, {1, std::nullopt}));
    const std::string eight = results_csv(run_study(small, {8, std::nullopt}));
    report(8, one == eight, fmt("50-trial results.csv with 1 and 8 threads byte-identical (%.0f bytes)",
                                static_cast<double>(one.size())));
  }

  {
    double nees_fsafe = 0.0, nees_kalman = 0.0;
    int n_fsafe = 0, n_kalman = 0;
    for (const auto& t : study.trials) {
      for (const auto& o : t.outcomes) {
        if (o.failed) continue;
        if (o.method == MethodVariant::FSafe) {
          nees_fsafe += o.landmark_nees;
          ++n_fsafe;
        } else if (o.method == MethodVariant::Kalman) {
          nees_kalman += o.landmark_nees;
          ++n_kalman;
        }
      }
    }
    nees_fsafe /= n_fsafe;
    nees_kalman /= n_kalman;
    report(9, nees_fsafe <= 3.0 && nees_kalman > nees_fsafe,
           fmt("mean landmark e^T P^-1 e / 2: fsafe %.3f (<= 3), kalman %.3g (> fsafe)", nees_fsafe, nees_kalman));
  }

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
