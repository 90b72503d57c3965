#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rlab/dataset.hpp"
#include "rlab/models.hpp"
#include "rlab/recourse.hpp"

namespace rlab {

enum class TargetLevel { global, subgroup, local };

std::string to_string(TargetLevel level);
TargetLevel target_level_from_string(const std::string& s);

/// Which instances the attack aims at: everyone predicted y, one protected
/// group of them, or a single row.
struct TargetSpec {
    TargetLevel level = TargetLevel::global;
    int y = 0; // the unfavorable class
    std::optional<int> subgroup_value;       // required iff level == subgroup
    std::optional<std::size_t> local_index;  // required iff level == local

    void validate() const;
};

struct PoisonConfig {
    std::size_t n = 1;           // outer draws
    std::size_t k = 3;           // diverse counterfactuals per draw
    double b = 1.5;              // upper bound of the alpha sweep
    std::size_t alpha_steps = 2; // grid points over [1, b]
    bool uniform_sampling = false;
    std::uint64_t seed = 0;
};

struct PoisonInstance {
    std::vector<double> z;
    int y = 0;
    std::size_t source_row = 0; // index into the target set's training rows
    std::size_t cf_index = 0;
    double alpha = 1.0;
};

struct PoisonSet {
    std::vector<PoisonInstance> instances;
    std::size_t failures = 0; // skipped counterfactuals times alpha grid size
    PoisonConfig config;

    Dataset append_to(const Dataset& train) const;
};

/// Uniform grid over [1, b]; a single point degenerates to {b} so the bound
/// stays meaningful.
std::vector<double> alpha_grid(double b, std::size_t steps);

using PredictFn = std::function<int(std::span<const double>)>;

/// Training rows the poisoning targets: all rows predicted t.y, optionally
/// filtered to one sensitive-attribute value, or a given singleton.
std::vector<std::size_t> build_target_set(const Dataset& ds, const TrainedModel& m,
                                          const TargetSpec& t);
std::vector<std::size_t> build_target_set(const Dataset& ds, const PredictFn& predict,
                                          const TargetSpec& t);

/// Inverse-distance sampling weights; +inf distances get weight zero.
std::vector<double> sample_weights(std::span<const double> distances);

/// Pluggable counterfactual machinery so the same attack drives both the
/// classifier pipeline and the event-detector case study.
struct CfEngine {
    // k diverse counterfactuals of x toward y_cf
    std::function<DiverseResult(std::span<const double> x, int y_cf, std::size_t k,
                                std::uint64_t seed)>
        diverse;
    // recourse cost of x (+inf on failure), used for boundary weighting
    std::function<double(std::span<const double> x, std::uint64_t seed)> boundary_cost;
};

CfEngine default_cf_engine(const TrainedModel& m, const CostSpec& c, const GenOptions& opts);

/// The counterfactual-based poisoning attack: draw target rows preferring
/// those close to the decision boundary, compute k diverse closest
/// counterfactuals each, and emit x + alpha * delta labeled t.y for every
/// alpha on the grid.
PoisonSet generate_poison(const Dataset& train, const TrainedModel& m, const TargetSpec& t,
                          const PoisonConfig& cfg, const CfEngine& engine);
PoisonSet generate_poison(const Dataset& train, const PredictFn& predict,
                          const TargetSpec& t, const PoisonConfig& cfg,
                          const CfEngine& engine);

struct LabelFlipResult {
    Dataset data;
    std::vector<std::size_t> flipped_indices;
};

/// Classic baseline: toggles the labels of ceil(fraction * n) uniformly
/// chosen rows.
LabelFlipResult label_flip_poison(const Dataset& train, double fraction, std::uint64_t seed);

/// Brute-force oracle (d <= 3): nearest point on the 1-NN decision boundary,
/// located by grid scan plus segment bisection.
std::vector<double> closest_boundary_point_1nn(const Dataset& train,
                                               std::span<const double> x,
                                               double grid_resolution);

/// Margin-slab construction for separable linear classifiers: count points
/// with 1 - xi <= -(w'z + b) < 1, labeled class 0.
PoisonSet svm_margin_poison(const TrainedModel& m, const Dataset& train, double xi,
                            std::size_t count, std::uint64_t seed);

struct PoisonVerdict {
    std::vector<double> cost_clean;
    std::vector<double> cost_poisoned; // aligned with cost_clean
    std::vector<std::size_t> evaluated_targets;
    std::size_t failures = 0;
    double mean_delta = 0.0;
    double median_delta = 0.0;
};

/// Retrains under the identical spec on train + poison and re-derives the
/// targets' recourse costs with the supplied generator.
PoisonVerdict verify_poisonous(
    const Dataset& train, const PoisonSet& poison, const ClassifierSpec& spec,
    std::span<const std::size_t> targets,
    const std::function<Counterfactual(const TrainedModel&, std::span<const double>, int,
                                       std::uint64_t)>& cf,
    const CostSpec& c);

std::string poison_set_to_json(const PoisonSet& ps);
PoisonSet poison_set_from_json(const std::string& text);

} // namespace rlab
