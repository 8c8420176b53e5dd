#include "modfuse/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace modfuse {

namespace {

using nlohmann::json;

// Reads the members of one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(where("") + "expected a JSON object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, key);
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
      const auto i = v->get<std::int64_t>();
      if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
        throw ConfigError(where(key) + "integer out of range");
      out = static_cast<int>(i);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + "expected true or false");
      out = v->get<bool>();
    }
  }

  template <std::size_t N>
  void numbers(const std::string& key, std::array<double*, N> out) {
    if (const json* v = get(key)) {
      if (!v->is_array() || v->size() != N)
        throw ConfigError(where(key) + "expected an array of " + std::to_string(N) + " numbers");
      for (std::size_t i = 0; i < N; ++i) *out[i] = as_number((*v)[i], key);
    }
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("unknown config key '" + prefix_ + item.key() + "'");
    }
  }

  std::string where(const std::string& key) const { return "config key '" + prefix_ + key + "': "; }

 private:
  double as_number(const json& v, const std::string& key) const {
    if (!v.is_number()) throw ConfigError(where(key) + "expected a number");
    return v.get<double>();
  }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return ss.str();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw IoError("bad number '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw IoError("bad integer '" + std::string(s) + "'");
  return v;
}

// JSON has no NaN; missing statistics (every trial failed) become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json distribution_json(const DistributionSummary& d) {
  return {{"n_trials", d.n_trials},
          {"n_failed", d.n_failed},
          {"mean", number_or_null(d.mean)},
          {"std", number_or_null(d.std)},
          {"median", number_or_null(d.median)},
          {"q1", number_or_null(d.q1)},
          {"q3", number_or_null(d.q3)},
          {"iqr", number_or_null(d.iqr)},
          {"whisker_low_bound", number_or_null(d.whisker_low_bound)},
          {"whisker_high_bound", number_or_null(d.whisker_high_bound)},
          {"whisker_low", number_or_null(d.whisker_low)},
          {"whisker_high", number_or_null(d.whisker_high)},
          {"n_outliers", d.n_outliers}};
}

json conventions_json() {
  return {{"statistic", "terminal landmark error e_l(T) in meters"},
          {"quantiles", "linear interpolation between order statistics at position (n-1)*p"},
          {"std", "population (divide by n)"},
          {"whiskers", "most extreme values within [q1 - 1.5 iqr, q3 + 1.5 iqr]"},
          {"outliers", "values outside the whisker bounds; included in mean and std"},
          {"failures", "failed trials are counted in n_failed and excluded from all statistics"}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

nlohmann::json config_to_json(const ScenarioConfig& c) {
  json methods = json::array();
  for (MethodVariant m : c.methods) methods.push_back(std::string(method_name(m)));
  const auto& n = c.noise;
  return {
      {"area_half_width",
       {{"robot", c.robot_half_width},
        {"landmark", c.landmark_half_width},
        {"estimate", c.estimate_half_width},
        {"arena", c.arena_half_width},
        {"lookahead", c.lookahead_half_width}}},
      {"T", c.steps},
      {"tau", c.tau},
      {"gps_period", c.gps_period},
      {"bearing_period", c.bearing_period},
      {"schedule_phase", c.schedule_phase},
      {"initial_cov_robot", {c.initial_cov_robot(0), c.initial_cov_robot(1), c.initial_cov_robot(2)}},
      {"initial_cov_landmark_scale", c.initial_cov_landmark_scale},
      {"noise_hyperparams",
       {{"sigma_v_variance", n.sigma_v_variance},
        {"sigma_w_variance", n.sigma_w_variance},
        {"gps_variance", {n.gps_variance(0), n.gps_variance(1), n.gps_variance(2)}},
        {"bearing_variance", n.bearing_variance},
        {"sample_gps_stds", n.sample_gps_stds}}},
      {"speed", c.speed},
      {"w0", c.w0},
      {"yaw_mix", {c.yaw_keep, c.yaw_mix}},
      {"yaw_innovation_range", {c.yaw_innovation_min, c.yaw_innovation_max}},
      {"yaw_clamp", c.yaw_clamp},
      {"lookahead_steps", c.lookahead_steps},
      {"noise_std_override", c.noise_std_override ? json(*c.noise_std_override) : json(nullptr)},
      {"exact_initial_estimates", c.exact_initial_estimates},
      {"methods", methods},
      {"seed", c.seed},
      {"n_trials", c.n_trials},
  };
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  ObjectReader r(j, "");

  if (const json* area = r.get("area_half_width")) {
    ObjectReader a(*area, "area_half_width.");
    a.number("robot", c.robot_half_width);
    a.number("landmark", c.landmark_half_width);
    a.number("estimate", c.estimate_half_width);
    a.number("arena", c.arena_half_width);
    a.number("lookahead", c.lookahead_half_width);
    a.finish();
  }
  r.integer("T", c.steps);
  r.number("tau", c.tau);
  r.integer("gps_period", c.gps_period);
  r.integer("bearing_period", c.bearing_period);
  r.integer("schedule_phase", c.schedule_phase);
  r.numbers<3>("initial_cov_robot",
               {&c.initial_cov_robot(0), &c.initial_cov_robot(1), &c.initial_cov_robot(2)});
  r.number("initial_cov_landmark_scale", c.initial_cov_landmark_scale);

  if (const json* noise = r.get("noise_hyperparams")) {
    ObjectReader nr(*noise, "noise_hyperparams.");
    auto& n = c.noise;
    nr.number("sigma_v_variance", n.sigma_v_variance);
    nr.number("sigma_w_variance", n.sigma_w_variance);
    nr.numbers<3>("gps_variance", {&n.gps_variance(0), &n.gps_variance(1), &n.gps_variance(2)});
    nr.number("bearing_variance", n.bearing_variance);
    nr.boolean("sample_gps_stds", n.sample_gps_stds);
    nr.finish();
  }

  r.number("speed", c.speed);
  r.number("w0", c.w0);
  r.numbers<2>("yaw_mix", {&c.yaw_keep, &c.yaw_mix});
  r.numbers<2>("yaw_innovation_range", {&c.yaw_innovation_min, &c.yaw_innovation_max});
  r.number("yaw_clamp", c.yaw_clamp);
  r.integer("lookahead_steps", c.lookahead_steps);

  if (const json* v = r.get("noise_std_override")) {
    if (v->is_null()) {
      c.noise_std_override.reset();
    } else if (v->is_number()) {
      c.noise_std_override = v->get<double>();
    } else {
      throw ConfigError(r.where("noise_std_override") + "expected a number or null");
    }
  }
  r.boolean("exact_initial_estimates", c.exact_initial_estimates);

  if (const json* v = r.get("methods")) {
    if (!v->is_array()) throw ConfigError(r.where("methods") + "expected an array of method names");
    c.methods.clear();
    for (const auto& item : *v) {
      const auto m = item.is_string() ? parse_method(item.get<std::string>()) : std::nullopt;
      if (!m) throw ConfigError(r.where("methods") + "unknown method " + item.dump());
      c.methods.push_back(*m);
    }
  }
  if (const json* v = r.get("seed")) {
    if (!v->is_number_unsigned()) throw ConfigError(r.where("seed") + "expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  r.integer("n_trials", c.n_trials);
  r.finish();

  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

std::vector<MethodVariant> parse_method_list(std::string_view list) {
  std::vector<MethodVariant> out;
  for (auto name : split(list, ',')) {
    const auto m = parse_method(name);
    if (!m) throw ConfigError("unknown method '" + std::string(name) + "'");
    if (std::find(out.begin(), out.end(), *m) != out.end())
      throw ConfigError("method '" + std::string(name) + "' listed twice");
    out.push_back(*m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results CSV
// ---------------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::vector<ResultRow> result_rows(const std::vector<TrialRecord>& trials) {
  std::vector<ResultRow> rows;
  for (const auto& t : trials) {
    for (const auto& o : t.outcomes) {
      rows.push_back({t.trial_index, t.seed, o.method, o.landmark_error, o.robot_position_error,
                      o.landmark_cov_det, o.failed});
    }
  }
  return rows;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsHeader << '\n';
  for (const auto& r : rows) {
    os << r.trial_index << ',' << r.seed << ',' << method_name(r.method) << ','
       << format_number(r.landmark_error) << ',' << format_number(r.robot_position_error) << ','
       << format_number(r.landmark_cov_det) << ',' << (r.failed ? 1 : 0) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("results file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw IoError("unexpected results header '" + line + "'");

  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto f = split(line, ',');
      if (f.size() != 7) throw IoError("expected 7 fields, got " + std::to_string(f.size()));
      ResultRow r;
      r.trial_index = parse_int<int>(f[0]);
      r.seed = parse_int<std::uint64_t>(f[1]);
      const auto m = parse_method(f[2]);
      if (!m) throw IoError("unknown method '" + std::string(f[2]) + "'");
      r.method = *m;
      r.landmark_error = parse_double(f[3]);
      r.robot_position_error = parse_double(f[4]);
      r.landmark_cov_det = parse_double(f[5]);
      if (f[6] != "0" && f[6] != "1") throw IoError("failed flag must be 0 or 1");
      r.failed = f[6] == "1";
      rows.push_back(r);
    } catch (const IoError& e) {
      throw IoError("results line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (is.bad()) throw IoError("error while reading results");
  return rows;
}

StudySummary summarize_rows(const std::vector<ResultRow>& rows) {
  std::vector<MethodVariant> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  // Trial order fixes the accumulation order of the mean, matching run_study.
  std::vector<const ResultRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ResultRow* a, const ResultRow* b) { return a->trial_index < b->trial_index; });

  StudySummary summary;
  for (MethodVariant m : order) {
    std::vector<double> values;
    std::size_t failed = 0;
    for (const ResultRow* r : sorted) {
      if (r->method != m) continue;
      if (r->failed) {
        ++failed;
      } else {
        values.push_back(r->landmark_error);
      }
    }
    summary.methods.push_back({m, summarize_distribution(values, failed)});
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Summary and box plot
// ---------------------------------------------------------------------------

nlohmann::json summary_to_json(const StudySummary& summary) {
  json methods = json::array();
  for (const auto& m : summary.methods) {
    json entry = distribution_json(m.errors);
    entry["method"] = std::string(method_name(m.method));
    methods.push_back(std::move(entry));
  }
  return {{"conventions", conventions_json()}, {"methods", methods}};
}

nlohmann::json boxplot_data_json(const StudySummary& summary) {
  json j = summary_to_json(summary);
  for (std::size_t i = 0; i < summary.methods.size(); ++i) {
    j["methods"][i]["outliers"] = summary.methods[i].errors.outliers;
  }
  j["y_axis"] = "log10";
  return j;
}

std::string render_boxplot_svg(const StudySummary& summary) {
  constexpr double width_per_box = 110.0, left = 70.0, right = 20.0, top = 30.0, bottom = 50.0;
  constexpr double plot_h = 380.0;
  const double plot_w = width_per_box * static_cast<double>(std::max<std::size_t>(summary.methods.size(), 1));
  const double width = left + plot_w + right, height = top + plot_h + bottom;

  // Log axis over every drawn value; non-positive values are pinned to the floor.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto extend = [&](double v) {
    if (std::isfinite(v) && v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (const auto& m : summary.methods) {
    const auto& d = m.errors;
    for (double v : {d.whisker_low, d.whisker_high, d.q1, d.q3, d.median, d.mean}) extend(v);
    for (double v : d.outliers) extend(v);
  }
  if (!std::isfinite(lo)) {
    lo = 0.1;
    hi = 10.0;
  }
  const double dec_lo = std::floor(std::log10(lo));
  double dec_hi = std::ceil(std::log10(hi));
  if (dec_hi <= dec_lo) dec_hi = dec_lo + 1.0;

  auto y_of = [&](double v) {
    const double lv = v > 0.0 ? std::log10(v) : dec_lo;
    const double frac = (std::clamp(lv, dec_lo, dec_hi) - dec_lo) / (dec_hi - dec_lo);
    return top + plot_h * (1.0 - frac);
  };

  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"18\" text-anchor=\"middle\">terminal landmark error e_l(T) [m]</text>\n";

  for (int d = static_cast<int>(dec_lo); d <= static_cast<int>(dec_hi); ++d) {
    const double y = y_of(std::pow(10.0, d));
    s << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\"" << y
      << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d << "</text>\n";
    if (d < static_cast<int>(dec_hi)) {
      for (int k = 2; k <= 9; ++k) {
        const double ym = y_of(k * std::pow(10.0, d));
        s << "<line x1=\"" << left - 3 << "\" y1=\"" << ym << "\" x2=\"" << left << "\" y2=\"" << ym
          << "\" stroke=\"black\"/>\n";
      }
    }
  }
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
    << top + plot_h << "\" stroke=\"black\"/>\n";

  for (std::size_t i = 0; i < summary.methods.size(); ++i) {
    const auto& m = summary.methods[i];
    const auto& d = m.errors;
    const double cx = left + width_per_box * (static_cast<double>(i) + 0.5);
    const double half = width_per_box * 0.3;
    const double x0 = cx - half, x1 = cx + half;
    s << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
      << method_name(m.method) << "</text>\n";
    if (d.n_failed > 0) {
      s << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 34 << "\" text-anchor=\"middle\" fill=\"red\">"
        << d.n_failed << " failed</text>\n";
    }
    if (d.n_trials == d.n_failed) continue;

    const double yq1 = y_of(d.q1), yq3 = y_of(d.q3);
    s << "<line x1=\"" << cx << "\" y1=\"" << y_of(d.whisker_low) << "\" x2=\"" << cx << "\" y2=\"" << yq1
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << cx << "\" y1=\"" << yq3 << "\" x2=\"" << cx << "\" y2=\"" << y_of(d.whisker_high)
      << "\" stroke=\"black\"/>\n";
    for (double w : {d.whisker_low, d.whisker_high}) {
      const double y = y_of(w);
      s << "<line x1=\"" << cx - half / 2 << "\" y1=\"" << y << "\" x2=\"" << cx + half / 2 << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    }
    s << "<rect x=\"" << x0 << "\" y=\"" << yq3 << "\" width=\"" << x1 - x0 << "\" height=\""
      << std::max(yq1 - yq3, 0.0) << "\" fill=\"#cfe2f3\" stroke=\"black\"/>\n";
    const double ym = y_of(d.median);
    s << "<line x1=\"" << x0 << "\" y1=\"" << ym << "\" x2=\"" << x1 << "\" y2=\"" << ym
      << "\" stroke=\"#e67e00\" stroke-width=\"2\"/>\n";
    const double ymean = y_of(d.mean);
    s << "<line x1=\"" << x0 << "\" y1=\"" << ymean << "\" x2=\"" << x1 << "\" y2=\"" << ymean
      << "\" stroke=\"green\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"/>\n";
    for (double v : d.outliers) {
      s << "<circle cx=\"" << cx << "\" cy=\"" << y_of(v) << "\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

void emit_boxplot(const std::vector<ResultRow>& rows, const std::filesystem::path& svg_path) {
  if (rows.empty()) throw IoError("no results to plot");
  const StudySummary summary = summarize_rows(rows);
  write_text_file(svg_path, render_boxplot_svg(summary));
  write_text_file(svg_path.parent_path() / "boxplot_data.json", boxplot_data_json(summary).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

void write_trace_csv(std::ostream& os, const TrialRecord& trial) {
  os << "step,truth_x,truth_y,truth_theta,landmark_x,landmark_y";
  for (const auto& o : trial.outcomes) {
    const auto n = method_name(o.method);
    os << ',' << n << "_x," << n << "_y," << n << "_theta," << n << "_lx," << n << "_ly";
  }
  os << '\n';
  for (std::size_t k = 0; k < trial.truth.size(); ++k) {
    const auto& p = trial.truth[k];
    os << k << ',' << format_number(p.x) << ',' << format_number(p.y) << ',' << format_number(p.theta)
       << ',' << format_number(trial.landmark.x()) << ',' << format_number(trial.landmark.y());
    for (const auto& o : trial.outcomes) {
      if (k < o.trace.size()) {
        const auto& r = o.trace[k];
        os << ',' << format_number(r.estimate_pose.x) << ',' << format_number(r.estimate_pose.y) << ','
           << format_number(r.estimate_pose.theta) << ',' << format_number(r.estimate_landmark.x()) << ','
           << format_number(r.estimate_landmark.y());
      } else {
        os << ",nan,nan,nan,nan,nan";
      }
    }
    os << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace modfuse
