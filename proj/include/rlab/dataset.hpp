#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlab/linalg.hpp"

namespace rlab {

/// Feature matrix with binary labels and an optional binary sensitive
/// attribute. Immutable by convention after construction; every pipeline
/// stage consumes and produces whole Dataset values.
struct Dataset {
    Matrix features;                       // n x d
    std::vector<int> labels;               // in {0, 1}
    std::vector<int> sensitive;            // empty, or length n in {0, 1}
    std::vector<std::string> feature_names;
    std::string provenance;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    bool has_sensitive() const { return !sensitive.empty(); }

    /// Enforces the structural invariants (finite entries, binary labels,
    /// consistent row counts). Throws std::invalid_argument on violation.
    void validate() const;

    Dataset subset(std::span<const std::size_t> indices) const;
};

/// Per-feature affine scaling fit on a training subset. Constant features
/// keep scale 1 and are flagged instead of dividing by zero.
struct Standardizer {
    std::vector<double> means;
    std::vector<double> scales;
    std::vector<bool> constant_flags;

    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> invert(std::span<const double> z) const;
    Matrix apply(const Matrix& x) const;
};

struct FoldPlan {
    std::size_t fold_count = 0;
    std::vector<std::size_t> assignments; // length n, values in [0, fold_count)
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Reads a comma-delimited file (header row, '.' decimal point). All columns
/// other than target/sensitive must be numeric, otherwise the offending
/// column is named in the thrown diagnostic. Non-{0,1} binary targets are
/// remapped and the mapping recorded in provenance.
Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::optional<std::string>& sensitive_column = std::nullopt);

/// Two isotropic unit-variance Gaussian clusters with means at
/// -separation/2 and +separation/2 along the first axis; labels follow the
/// cluster, the sensitive bit is an independent fair coin.
Dataset make_synthetic_gaussians(std::size_t n, std::size_t d, double separation,
                                 std::uint64_t seed);

/// Randomly drops majority-class rows until class counts are equal. Minority
/// rows are always retained and surviving rows keep their original order.
Dataset undersample_majority(const Dataset& ds, std::uint64_t seed);

/// Fits mean/scale on fit_indices only (population variance), then transforms
/// every row of the dataset.
std::pair<Standardizer, Dataset> standardize(const Dataset& ds,
                                             std::span<const std::size_t> fit_indices);

/// Label-stratified k-fold assignment; per-class fold sizes differ by at most
/// one. Deterministic given seed.
FoldPlan kfold(const Dataset& ds, std::size_t folds, std::uint64_t seed);

} // namespace rlab
