#pragma once

#include <span>
#include <string>
#include <vector>

#include "rlab/linalg.hpp"

namespace rlab {

struct MannWhitneyResult {
    double u = 0.0;       // U statistic of sample_a (greater-than pairs, ties half)
    double p_value = 1.0; // two-sided
    bool exact = false;   // exact enumeration vs normal approximation
};

/// Two-sided Mann-Whitney U test. Exact null enumeration when the combined
/// sample is small (<= 12) and tie-free; otherwise the normal approximation
/// with midranks, tie-corrected variance and continuity correction.
/// force_approximation skips the exact path (used to validate the
/// approximation against enumeration).
MannWhitneyResult mann_whitney_u(std::span<const double> sample_a,
                                 std::span<const double> sample_b,
                                 bool force_approximation = false);

/// Significance stars at the usual cutpoints: ns, *, **, ***.
std::string significance_stars(double p_value);

double f1_score(std::span<const int> predictions, std::span<const int> labels);

/// Gaussian-kernel KDE log-density at each query row. Bandwidth is per-
/// dimension Scott's rule n^(-1/(d+4)) * sigma_j unless overridden (> 0);
/// constant dimensions fall back to bandwidth 1.
std::vector<double> kde_loglik(const Matrix& fit, const Matrix& query,
                               double bandwidth_override = 0.0);

} // namespace rlab
