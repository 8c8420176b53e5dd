// modfuse: Monte Carlo study of modular landmark fusion.
//
//   modfuse run --config cfg.json --trials N --seed S --methods joint,fsafe --out DIR
//               [--threads K] [--trace-trial I]
//   modfuse summarize --in results.csv --out summary.json
//   modfuse boxplot --in results.csv --out plot.svg
//
// Exit codes: 0 success, 2 config or usage error, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "modfuse/report.hpp"

namespace fs = std::filesystem;
using namespace modfuse;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct RunArgs {
  std::string config;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string methods;
  std::string out;
  std::optional<int> threads;
  std::optional<int> trace_trial;
};

int thread_count(const std::optional<int>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MODFUSE_THREADS")) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(env, &used);
      if (used == std::string_view(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("MODFUSE_THREADS must be a positive integer, got '") + env + "'");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<ResultRow> load_results(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_results_csv(in);
}

void cmd_run(const RunArgs& a) {
  ScenarioConfig config = a.config.empty() ? ScenarioConfig{} : load_config(a.config);
  if (a.trials) config.n_trials = *a.trials;
  if (a.seed) config.seed = *a.seed;
  if (!a.methods.empty()) config.methods = parse_method_list(a.methods);
  config.validate();

  RunOptions opts;
  opts.threads = thread_count(a.threads);
  if (a.trace_trial) {
    if (*a.trace_trial < 0 || *a.trace_trial >= config.n_trials)
      throw ConfigError("--trace-trial must lie in [0, n_trials)");
    opts.trace_trial = a.trace_trial;
  }

  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());

  const StudyResult result = run_study(config, opts);
  const auto rows = result_rows(result.trials);

  std::ostringstream csv;
  write_results_csv(csv, rows);
  write_text_file(out / "results.csv", csv.str());
  write_text_file(out / "summary.json", summary_to_json(result.summary).dump(2) + "\n");
  emit_boxplot(rows, out / "boxplot.svg");

  if (opts.trace_trial) {
    std::ostringstream trace;
    write_trace_csv(trace, result.trials[static_cast<std::size_t>(*opts.trace_trial)]);
    write_text_file(out / ("trajectories_" + std::to_string(*opts.trace_trial) + ".csv"), trace.str());
  }

  for (const auto& m : result.summary.methods) {
    std::cout << method_name(m.method) << ": mean e_l(T) = " << m.errors.mean << " m, std = " << m.errors.std;
    if (m.errors.n_failed > 0) std::cout << ", FAILED " << m.errors.n_failed << " of " << m.errors.n_trials;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular landmark fusion study"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a Monte Carlo study");
  run->add_option("--config", run_args.config, "JSON scenario config");
  run->add_option("--trials", run_args.trials, "Number of trials")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_args.seed, "Study seed");
  run->add_option("--methods", run_args.methods, "Comma-separated methods: joint,fsafe,fkalman,safe,kalman");
  run->add_option("--out", run_args.out, "Output directory")->required();
  run->add_option("--threads", run_args.threads, "Worker threads (default: MODFUSE_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  run->add_option("--trace-trial", run_args.trace_trial, "Also write per-step trajectories of this trial");

  std::string sum_in, sum_out;
  auto* summarize = app.add_subcommand("summarize", "Summarize a results CSV");
  summarize->add_option("--in", sum_in, "results.csv")->required();
  summarize->add_option("--out", sum_out, "summary.json")->required();

  std::string box_in, box_out;
  auto* boxplot = app.add_subcommand("boxplot", "Draw a log-scale box plot of a results CSV");
  boxplot->add_option("--in", box_in, "results.csv")->required();
  boxplot->add_option("--out", box_out, "plot.svg")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      cmd_run(run_args);
    } else if (*summarize) {
      const StudySummary summary = summarize_rows(load_results(sum_in));
      write_text_file(sum_out, summary_to_json(summary).dump(2) + "\n");
    } else if (*boxplot) {
      emit_boxplot(load_results(box_in), box_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
