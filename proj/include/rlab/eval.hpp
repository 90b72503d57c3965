#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlab/dataset.hpp"
#include "rlab/models.hpp"
#include "rlab/poison.hpp"
#include "rlab/recourse.hpp"

namespace rlab {

enum class CfMethod { nun, gradcf, diverse, proto };
enum class AttackKind { algorithm1, label_flip };

std::string to_string(CfMethod m);
CfMethod cf_method_from_string(const std::string& s);
std::string to_string(AttackKind a);
AttackKind attack_kind_from_string(const std::string& s);

struct DataSource {
    enum class Kind { synthetic, csv };
    Kind kind = Kind::synthetic;
    std::size_t n = 500;
    std::size_t d = 5;
    double separation = 4.0;
    std::string path;
    std::string target_column;
    std::optional<std::string> sensitive_column;
};

struct ExperimentConfig {
    DataSource data;
    ClassifierSpec classifier;
    CfMethod cf_method = CfMethod::gradcf;
    CostSpec cost{1, {}, 1e-6}; // l1 recourse cost by default
    TargetSpec target;
    AttackKind attack = AttackKind::algorithm1;
    std::vector<double> budgets = {0.05};
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    bool uniform_sampling = false; // ablation switch for the attack sampler
    std::size_t poison_k = 3;
    double poison_b = 1.5;
    std::size_t alpha_steps = 2;
    GenOptions gen;
    std::size_t workers = 1;

    void validate() const;
};

struct MetricRecord {
    int fold = -1; // -1 marks the pooled record over all folds
    double budget = 0.0;
    std::string name;
    std::vector<double> values;
    double median = 0.0;
    double p_value = 1.0;
    std::string stars = "ns";
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<MetricRecord> records;
    std::size_t cf_failures = 0;       // instances dropped from the diffs
    std::size_t poison_failures = 0;   // skipped attack counterfactuals
    std::size_t zero_cost_exclusions = 0;
    std::uint64_t seed = 0;
    int schema_version = 1;
    // deterministic work counters; wall-clock goes to the run manifest only
    std::size_t counterfactuals_computed = 0;
    std::size_t models_trained = 0;

    const MetricRecord* find(const std::string& name, double budget, int fold = -1) const;
};

/// Percentage change of the recourse cost; requires a positive clean cost.
double cost_diff_pct(double cost_poisoned, double cost_clean);

/// Relative change of the between-group cost gap, medians per group.
/// Returns nullopt when the clean gap is zero (sentinel: excluded, counted).
std::optional<double> subgroup_gap_pct(std::span<const double> clean_g0,
                                       std::span<const double> clean_g1,
                                       std::span<const double> poisoned_g0,
                                       std::span<const double> poisoned_g1);

/// The cross-validation protocol: per fold train a clean model, explain every
/// negatively classified test row, then for each budget inject poison (or
/// flip labels), retrain under the identical spec, re-explain, and record
/// cost/sparsity/plausibility/F1 shifts with Mann-Whitney significance.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string report_to_json(const ExperimentReport& rep);
ExperimentReport report_from_json(const std::string& text);
std::string report_to_csv(const ExperimentReport& rep);

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct EmittedFiles {
    std::vector<std::string> paths;
};

/// Writes report.{json,csv,svg} as requested into out_dir; returns paths.
EmittedFiles emit_report(const ExperimentReport& rep, const std::string& out_dir,
                         const std::vector<std::string>& formats);

} // namespace rlab
