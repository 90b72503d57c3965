#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlab/linalg.hpp"

namespace rlab {

enum class DefenseMethod { iforest, lof, knn_defense, l2_defense, slab_defense };

std::string to_string(DefenseMethod m);
DefenseMethod defense_method_from_string(const std::string& s);

struct DefenseSpec {
    DefenseMethod method = DefenseMethod::iforest;
    std::size_t k = 5;              // knn defense neighbor rank
    double calibration_fpr = 0.05;  // operating point on the clean hold-out
    std::size_t iforest_trees = 100;
    std::size_t iforest_subsample = 256;
    std::size_t lof_k = 20;
    bool knn_cross_class = false;   // search neighbors across labels too
    std::uint64_t seed = 0;
};

struct DetectionReport {
    std::string method;
    std::vector<bool> flags;      // one per scored row
    std::vector<double> scores;   // higher = more anomalous
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    bool precision_defined = true; // false when nothing was flagged
    std::vector<std::size_t> poison_indices;
};

/// Isolation scores 2^(-E[path length]/c(psi)); higher is more anomalous.
std::vector<double> iforest_scores(const Matrix& data, const DefenseSpec& spec);

/// Classical local outlier factor with spec.lof_k neighbors (~1 for inliers).
std::vector<double> lof_scores(const Matrix& data, const DefenseSpec& spec);

/// Distance to the k-th nearest neighbor, searched within the same assigned
/// class unless spec.knn_cross_class is set. The defense flags rows where
/// this statistic reaches the threshold.
std::vector<double> knn_defense_scores(const Matrix& data, std::span<const int> labels,
                                       const DefenseSpec& spec);
std::vector<bool> knn_defense(const Matrix& data, std::span<const int> labels, std::size_t k,
                              double threshold);

/// Distance to the own-class centroid.
std::vector<double> l2_defense_scores(const Matrix& data, std::span<const int> labels);
std::vector<bool> l2_defense(const Matrix& data, std::span<const int> labels,
                             double threshold);

/// |(mu0 - mu1)' (x - mu_y)|: displacement projected onto the line between
/// the class centroids.
std::vector<double> slab_defense_scores(const Matrix& data, std::span<const int> labels);
std::vector<bool> slab_defense(const Matrix& data, std::span<const int> labels,
                               double threshold);

/// Empirical (1 - fpr) quantile with the convention that exactly
/// floor(fpr * n) clean points score at or above the returned threshold
/// (ties can only widen the flagged set; fpr -> 0 yields a threshold above
/// the maximum).
double calibrate_threshold(std::span<const double> scores_on_clean, double fpr);

DetectionReport evaluate_detection(const std::vector<bool>& flags,
                                   const std::vector<double>& scores, double threshold,
                                   const std::vector<std::size_t>& poison_indices,
                                   const std::string& method);

/// Scores the combined (train + poison) matrix, calibrates on the clean
/// hold-out, and reports recall/precision against the known poison rows.
DetectionReport run_defense(const Matrix& combined, std::span<const int> combined_labels,
                            const Matrix& holdout, std::span<const int> holdout_labels,
                            const std::vector<std::size_t>& poison_indices,
                            const DefenseSpec& spec);

std::string detection_report_to_json(const DetectionReport& report);

} // namespace rlab
