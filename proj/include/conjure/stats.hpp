#pragma once

#include <span>
#include <vector>

namespace conjure {

// 1-based ranks, ties share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with average ranks on ties. Throws
/// std::invalid_argument for mismatched or too-short inputs and
/// UndefinedCorrelation when either side has zero rank variance.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace conjure
