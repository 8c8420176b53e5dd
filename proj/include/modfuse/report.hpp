#pragma once

// File formats of the study tool: JSON scenario config, per-trial results CSV,
// summary JSON, box-plot SVG with its JSON sidecar, and trajectory traces.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "modfuse/scenario.hpp"

namespace modfuse {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

nlohmann::json config_to_json(const ScenarioConfig& config);

/// Every key is optional; unknown keys and ill-typed values throw ConfigError
/// naming the offending key.
ScenarioConfig config_from_json(const nlohmann::json& j);

/// IoError if unreadable, ConfigError if unparseable or invalid.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Comma-separated lowercase method names.
std::vector<MethodVariant> parse_method_list(std::string_view list);

// ---------------------------------------------------------------------------
// Results CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kResultsHeader =
    "trial_index,seed,method,e_l_T,robot_pos_err_T,det_Pl_T,failed";

struct ResultRow {
  int trial_index = 0;
  std::uint64_t seed = 0;
  MethodVariant method = MethodVariant::FSafe;
  double landmark_error = 0.0;
  double robot_position_error = 0.0;
  double landmark_cov_det = 0.0;
  bool failed = false;
};

/// 17 significant digits (trailing zeros dropped), so values read back
/// bit-identically; non-finite values print as "nan", "inf", "-inf".
std::string format_number(double v);

std::vector<ResultRow> result_rows(const std::vector<TrialRecord>& trials);
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
/// Throws IoError on a malformed file.
std::vector<ResultRow> read_results_csv(std::istream& is);

/// Methods in order of first appearance; failed rows are counted, not used.
StudySummary summarize_rows(const std::vector<ResultRow>& rows);

// ---------------------------------------------------------------------------
// Summary and box plot
// ---------------------------------------------------------------------------

nlohmann::json summary_to_json(const StudySummary& summary);

/// Box-plot numbers (summary plus outlier values) as written next to the SVG.
nlohmann::json boxplot_data_json(const StudySummary& summary);

/// Log-scale box plot: IQR box, median, 1.5 IQR whiskers, outliers, dashed mean.
std::string render_boxplot_svg(const StudySummary& summary);

/// Writes `svg_path` and `boxplot_data.json` in the same directory.
void emit_boxplot(const std::vector<ResultRow>& rows, const std::filesystem::path& svg_path);

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

void write_trace_csv(std::ostream& os, const TrialRecord& trial);

/// Writes text to a file, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace modfuse
