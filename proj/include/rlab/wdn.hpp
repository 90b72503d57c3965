#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlab/eval.hpp"
#include "rlab/linalg.hpp"
#include "rlab/recourse.hpp"

namespace rlab {

struct FaultSpec {
    std::size_t sensor = 0;
    std::size_t start = 0;
    std::size_t end = 0; // exclusive
    double sigma = 1.0;  // gaussian noise level of the degraded sensor
};

/// Generator knobs. The base mixing structure depends on the seed only;
/// jitter_stream selects an independent perturbation of that structure, so
/// scenarios sharing a seed are correlated but not identical.
struct ScenarioParams {
    std::size_t harmonics = 3;
    double observation_noise = 0.02;
    double jitter = 0.05;
    std::uint64_t jitter_stream = 0;
};

struct SensorScenario {
    Matrix readings; // T x m
    std::vector<FaultSpec> faults;
    std::uint64_t seed = 0;
    ScenarioParams params;
};

/// Correlated multi-sensor series: per-sensor affine mixtures of a shared
/// smooth latent demand signal plus iid observation noise; faults add
/// N(0, sigma^2) on the given sensor inside the window.
SensorScenario synth_scenario(std::size_t m, std::size_t t_steps,
                              const std::vector<FaultSpec>& faults, std::uint64_t seed,
                              const ScenarioParams& params = {});

/// One linear virtual sensor per physical sensor: each reading predicted from
/// all the others by least squares.
struct VirtualSensorEnsemble {
    Matrix coef;                   // m x m, zero diagonal
    std::vector<double> intercept; // m
    double zeta = 0.0;

    std::size_t sensors() const { return intercept.size(); }
    std::vector<double> residual(std::span<const double> x) const; // f(x) - x
    double residual_norm(std::span<const double> x) const;         // l2
};

VirtualSensorEnsemble fit_ensemble(const Matrix& clean_readings);

/// zeta = empirical (1 - false_alarm_rate) quantile of the clean residual
/// norms (same convention as the defense calibration).
double calibrate_zeta(const VirtualSensorEnsemble& ens, const Matrix& clean_validation,
                      double false_alarm_rate);

/// Alarm iff the residual norm reaches zeta (boundary inclusive).
int detect(const VirtualSensorEnsemble& ens, std::span<const double> x_t);

/// Minimum-sparsity alarm repair: exhaustive subset search up to max_support;
/// per subset the least-squares correction over those coordinates. Smallest
/// support achieving residual < zeta wins, ties by smaller l2 of delta.
/// Returns valid == false when no subset within max_support suffices.
Counterfactual explain_alarm(const VirtualSensorEnsemble& ens, std::span<const double> x_t,
                             std::size_t max_support);

struct WdnCaseConfig {
    std::size_t sensors = 4;
    std::size_t steps_per_scenario = 334; // 3 scenarios: ~1000 training rows
    std::size_t scenarios_per_set = 3;
    double observation_noise = 0.01;
    double fault_sigma = 10.0; // aging sensor noise, far above ambient
    std::size_t faults_per_scenario = 2;
    std::size_t fault_length = 60;
    double false_alarm_rate = 0.05;
    double poison_budget = 0.05; // fraction of the training rows
    double alpha = 1.5;          // fixed extension factor, uniform sampling
    double train_jitter = 0.01;
    double eval_jitter = 0.04;   // sim-to-real gap of the evaluation set
};

struct WdnReport {
    WdnCaseConfig config;
    std::vector<MetricRecord> records;
    std::size_t poison_count = 0;
    std::size_t poison_failures = 0;
    std::size_t true_positives_clean = 0;
    std::size_t true_positives_poisoned = 0;
    std::uint64_t seed = 0;
    int schema_version = 1;

    const MetricRecord* find(const std::string& name) const;
};

/// The three scenario sets of the case study: fault-free training, faulty
/// attack-construction, faulty perturbed evaluation.
struct CaseSets {
    std::vector<SensorScenario> train;
    std::vector<SensorScenario> attack;
    std::vector<SensorScenario> eval;
};

CaseSets build_case_sets(std::uint64_t seed, const WdnCaseConfig& cfg = {});

/// The event-detector case study: fit + calibrate on fault-free scenarios,
/// build poison from the true-positive alarms of a second faulty set using
/// the detector's own repair counterfactuals, refit, and compare the repair
/// sparsity on a third (perturbed) faulty set.
WdnReport run_case_study(std::uint64_t seed, const WdnCaseConfig& cfg = {});

std::string wdn_report_to_json(const WdnReport& rep);
std::string scenario_to_csv(const SensorScenario& scenario);
std::string scenario_faults_to_json(const SensorScenario& scenario);

} // namespace rlab
