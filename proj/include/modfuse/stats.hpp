#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace modfuse {

/// Quantile by linear interpolation between order statistics, position
/// (n - 1) * p. `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Box-plot style description of a sample. Failures are counted but take no
/// part in any statistic.
struct DistributionSummary {
  std::size_t n_trials = 0;  // values + failures
  std::size_t n_failed = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double whisker_low_bound = 0.0;   // q1 - 1.5 iqr
  double whisker_high_bound = 0.0;  // q3 + 1.5 iqr
  double whisker_low = 0.0;         // smallest value inside the bounds
  double whisker_high = 0.0;        // largest value inside the bounds
  std::size_t n_outliers = 0;
  std::vector<double> outliers;  // ascending
};

/// `values` in their natural (trial) order; the mean and std are accumulated in
/// that order so that equal inputs give bit-identical outputs.
DistributionSummary summarize_distribution(std::span<const double> values, std::size_t n_failed);

}  // namespace modfuse
