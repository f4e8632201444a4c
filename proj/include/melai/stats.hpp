#pragma once

#include <span>
#include <vector>

namespace melai::stats {

/// Linear interpolation between closest ranks (numpy's default method).
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);

struct MannWhitneyResult {
    double u1 = 0.0;  // statistic of the first sample
    double u2 = 0.0;
    double u = 0.0;   // min(u1, u2)
    double z = 0.0;   // normal approximation only
    double p = 1.0;   // two-sided
    bool exact = false;
    double median_a = 0.0;
    double median_b = 0.0;
};

/// Two-sided Mann-Whitney U test. Normal approximation with tie and
/// continuity correction when both samples hold at least 8 values; exact
/// permutation distribution of the mid-rank sum otherwise.
MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b);

/// Mid-ranks (1-based) of the pooled values.
std::vector<double> midranks(std::span<const double> values);

} // namespace melai::stats
