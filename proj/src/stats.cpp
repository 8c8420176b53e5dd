#include "modfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace modfuse {

double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DistributionSummary summarize_distribution(std::span<const double> values, std::size_t n_failed) {
  DistributionSummary s;
  s.n_failed = n_failed;
  s.n_trials = values.size() + n_failed;
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean = s.std = s.median = s.q1 = s.q3 = s.iqr = nan;
    s.whisker_low_bound = s.whisker_high_bound = s.whisker_low = s.whisker_high = nan;
    return s;
  }

  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.iqr = s.q3 - s.q1;
  s.whisker_low_bound = s.q1 - 1.5 * s.iqr;
  s.whisker_high_bound = s.q3 + 1.5 * s.iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  for (double v : sorted) {
    if (v < s.whisker_low_bound || v > s.whisker_high_bound) {
      s.outliers.push_back(v);
    } else {
      s.whisker_low = std::min(s.whisker_low, v);
      s.whisker_high = std::max(s.whisker_high, v);
    }
  }
  s.n_outliers = s.outliers.size();
  return s;
}

}  // namespace modfuse
