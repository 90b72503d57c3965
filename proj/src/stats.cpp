#include "rlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace rlab {

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Number of subsets and tail mass of the exact U null distribution, built by
// the standard dynamic program over rank subsets.
// count[u] = number of ways to choose n1 of N ranks with U statistic u.
std::vector<double> exact_u_counts(std::size_t n1, std::size_t n2) {
    const std::size_t umax = n1 * n2;
    // dp over items: dp[k][u] after considering i ranks; subset size k.
    std::vector<std::vector<double>> dp(n1 + 1, std::vector<double>(umax + 1, 0.0));
    dp[0][0] = 1.0;
    for (std::size_t i = 1; i <= n1 + n2; ++i) {
        for (std::size_t k = std::min(i, n1); k-- > 0;) {
            // adding rank i as the (k+1)-th member contributes (i - 1 - k)
            // "greater than other sample" pairs... use the standard recurrence
            // dp'[k+1][u] += dp[k][u - (i - 1 - k)] where the contribution is
            // the count of unchosen smaller ranks.
            for (std::size_t u = 0; u <= umax; ++u) {
                if (dp[k][u] == 0.0) continue;
                const std::size_t contrib = i - 1 - k;
                if (u + contrib <= umax) dp[k + 1][u + contrib] += dp[k][u];
            }
        }
    }
    return dp[n1];
}

} // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> sample_a,
                                 std::span<const double> sample_b,
                                 bool force_approximation) {
    if (sample_a.empty() || sample_b.empty())
        throw std::invalid_argument("mann_whitney_u: empty sample");
    const std::size_t n1 = sample_a.size();
    const std::size_t n2 = sample_b.size();

    // U of sample_a by direct pair counting (ties count half).
    double u_a = 0.0;
    bool has_ties = false;
    for (double a : sample_a)
        for (double b : sample_b) {
            if (a > b)
                u_a += 1.0;
            else if (a == b) {
                u_a += 0.5;
                has_ties = true;
            }
        }
    // ties within a sample also break exactness
    auto has_dup = [](std::span<const double> v) {
        std::vector<double> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        return std::adjacent_find(s.begin(), s.end()) != s.end();
    };

    MannWhitneyResult result;
    result.u = u_a;

    if (!force_approximation && n1 + n2 <= 12 && !has_ties && !has_dup(sample_a) &&
        !has_dup(sample_b)) {
        const auto counts = exact_u_counts(n1, n2);
        double total = 0.0;
        for (double c : counts) total += c;
        const double u_lo = std::min(u_a, static_cast<double>(n1 * n2) - u_a);
        double tail = 0.0;
        for (std::size_t u = 0; u < counts.size(); ++u) {
            if (static_cast<double>(u) <= u_lo + 1e-12) tail += counts[u];
            if (static_cast<double>(n1 * n2 - u) <= u_lo + 1e-12) tail += counts[u];
        }
        result.exact = true;
        result.p_value = std::min(1.0, tail / total);
        return result;
    }

    // Normal approximation with midrank tie correction.
    const double nn1 = static_cast<double>(n1), nn2 = static_cast<double>(n2);
    const double n = nn1 + nn2;
    const double mu = 0.5 * nn1 * nn2;
    std::map<double, std::size_t> tie_groups;
    for (double v : sample_a) ++tie_groups[v];
    for (double v : sample_b) ++tie_groups[v];
    double tie_sum = 0.0;
    for (const auto& [value, t] : tie_groups) {
        const double td = static_cast<double>(t);
        tie_sum += td * td * td - td;
    }
    double var = nn1 * nn2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if (var <= 0.0) { // all observations identical
        result.p_value = 1.0;
        return result;
    }
    const double z = std::max(0.0, std::fabs(u_a - mu) - 0.5) / std::sqrt(var);
    result.p_value = std::min(1.0, 2.0 * normal_sf(z));
    return result;
}

std::string significance_stars(double p_value) {
    if (p_value <= 0.001) return "***";
    if (p_value <= 0.01) return "**";
    if (p_value <= 0.05) return "*";
    return "ns";
}

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("f1_score: length mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == 1 && labels[i] == 1) ++tp;
        if (predictions[i] == 1 && labels[i] == 0) ++fp;
        if (predictions[i] == 0 && labels[i] == 1) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    if (denom == 0.0) return 1.0; // no positives anywhere: nothing wrong
    return 2.0 * tp / denom;
}

std::vector<double> kde_loglik(const Matrix& fit, const Matrix& query,
                               double bandwidth_override) {
    if (fit.rows == 0) throw std::invalid_argument("kde_loglik: empty fit set");
    if (fit.cols != query.cols) throw std::invalid_argument("kde_loglik: dim mismatch");
    const std::size_t n = fit.rows;
    const std::size_t d = fit.cols;

    std::vector<double> h(d, bandwidth_override);
    if (bandwidth_override <= 0.0) {
        // Scott's rule, diagonal bandwidth
        const double factor =
            std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += fit.at(i, j) / n;
            for (std::size_t i = 0; i < n; ++i) {
                const double c = fit.at(i, j) - mean;
                var += c * c / n;
            }
            const double sigma = std::sqrt(var);
            h[j] = sigma > 0.0 ? factor * sigma : 1.0;
        }
    }

    double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) -
                      std::log(static_cast<double>(n));
    for (std::size_t j = 0; j < d; ++j) log_norm -= std::log(h[j]);

    std::vector<double> out(query.rows);
    for (std::size_t q = 0; q < query.rows; ++q) {
        // log-sum-exp over kernels
        double max_e = -std::numeric_limits<double>::infinity();
        std::vector<double> exps(n);
        for (std::size_t i = 0; i < n; ++i) {
            double e = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double z = (query.at(q, j) - fit.at(i, j)) / h[j];
                e -= 0.5 * z * z;
            }
            exps[i] = e;
            max_e = std::max(max_e, e);
        }
        double s = 0.0;
        for (double e : exps) s += std::exp(e - max_e);
        out[q] = log_norm + max_e + std::log(s);
    }
    return out;
}

} // namespace rlab
