#pragma once

#include <span>
#include <vector>

namespace fcid {

/// q-th percentile, q in [0, 100], linear interpolation between order statistics.
double percentile_linear(std::span<const double> values, double q);

/// Median; for an even count, the midpoint of the two central order statistics.
double median(std::span<const double> values);

/// Average ranks (1-based), ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace fcid
