#include "rlab/wdn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rlab/defense.hpp"
#include "rlab/json_io.hpp"
#include "rlab/poison.hpp"
#include "rlab/rng.hpp"
#include "rlab/stats.hpp"

namespace rlab {

SensorScenario synth_scenario(std::size_t m, std::size_t t_steps,
                              const std::vector<FaultSpec>& faults, std::uint64_t seed,
                              const ScenarioParams& params) {
    if (m < 2) throw std::invalid_argument("scenario: need at least 2 sensors");
    if (t_steps < 4) throw std::invalid_argument("scenario: need at least 4 timesteps");
    for (const auto& f : faults) {
        if (f.sensor >= m) throw std::invalid_argument("scenario: fault sensor out of range");
        if (f.start >= f.end || f.end > t_steps)
            throw std::invalid_argument("scenario: fault window outside [0,T)");
        if (!(f.sigma > 0.0)) throw std::invalid_argument("scenario: fault sigma must be > 0");
    }

    // Base structure is a function of the seed alone.
    Rng base(derive_seed(seed, 0xbade));
    const std::size_t harmonics = std::max<std::size_t>(1, params.harmonics);
    std::vector<double> amplitude(harmonics), period(harmonics), phase(harmonics);
    for (std::size_t k = 0; k < harmonics; ++k) {
        amplitude[k] = 1.0 / static_cast<double>(1 + 2 * k);
        period[k] = static_cast<double>(t_steps) / (3.0 + 4.0 * static_cast<double>(k));
        phase[k] = base.uniform(0.0, 2.0 * M_PI);
    }
    std::vector<double> gain(m), offset(m);
    for (std::size_t s = 0; s < m; ++s) {
        gain[s] = base.uniform(0.8, 1.2);
        offset[s] = base.uniform(5.0, 15.0);
    }

    // Jitter perturbs the structure per scenario; observation noise is fresh.
    Rng jitter_rng(derive_seed(seed, 0x717e, params.jitter_stream));
    std::vector<double> phase_j(phase), gain_j(gain);
    for (std::size_t k = 0; k < harmonics; ++k)
        phase_j[k] += params.jitter * jitter_rng.normal();
    for (std::size_t s = 0; s < m; ++s)
        gain_j[s] *= 1.0 + params.jitter * jitter_rng.normal();

    Rng noise(derive_seed(seed, 0x4015e, params.jitter_stream));
    SensorScenario scenario;
    scenario.readings = Matrix(t_steps, m);
    scenario.faults = faults;
    scenario.seed = seed;
    scenario.params = params;
    for (std::size_t t = 0; t < t_steps; ++t) {
        double latent = 0.0;
        for (std::size_t k = 0; k < harmonics; ++k)
            latent += amplitude[k] *
                      std::sin(2.0 * M_PI * static_cast<double>(t) / period[k] + phase_j[k]);
        for (std::size_t s = 0; s < m; ++s)
            scenario.readings.at(t, s) =
                offset[s] + gain_j[s] * latent +
                (params.observation_noise > 0.0 ? noise.normal(0.0, params.observation_noise)
                                                : 0.0);
    }
    Rng fault_rng(derive_seed(seed, 0xfa17, params.jitter_stream));
    for (const auto& f : faults)
        for (std::size_t t = f.start; t < f.end; ++t)
            scenario.readings.at(t, f.sensor) += fault_rng.normal(0.0, f.sigma);
    return scenario;
}

std::vector<double> VirtualSensorEnsemble::residual(std::span<const double> x) const {
    const std::size_t m = sensors();
    if (x.size() != m) throw std::invalid_argument("ensemble: dimension mismatch");
    std::vector<double> r(m);
    for (std::size_t s = 0; s < m; ++s) {
        double pred = intercept[s];
        for (std::size_t j = 0; j < m; ++j) pred += coef.at(s, j) * x[j];
        r[s] = pred - x[s];
    }
    return r;
}

double VirtualSensorEnsemble::residual_norm(std::span<const double> x) const {
    return norm2(residual(x));
}

VirtualSensorEnsemble fit_ensemble(const Matrix& clean_readings) {
    const std::size_t n = clean_readings.rows;
    const std::size_t m = clean_readings.cols;
    if (n <= m) throw std::invalid_argument("fit_ensemble: more sensors than rows");

    VirtualSensorEnsemble ens;
    ens.coef = Matrix(m, m, 0.0);
    ens.intercept.assign(m, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
        Matrix design(n, m - 1);
        std::vector<double> target(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t col = 0;
            for (std::size_t j = 0; j < m; ++j) {
                if (j == s) continue;
                design.at(i, col++) = clean_readings.at(i, j);
            }
            target[i] = clean_readings.at(i, s);
        }
        const auto beta = ols_fit(design, target);
        std::size_t col = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == s) continue;
            ens.coef.at(s, j) = beta[col++];
        }
        ens.intercept[s] = beta.back();
    }
    return ens;
}

double calibrate_zeta(const VirtualSensorEnsemble& ens, const Matrix& clean_validation,
                      double false_alarm_rate) {
    std::vector<double> norms(clean_validation.rows);
    for (std::size_t t = 0; t < clean_validation.rows; ++t)
        norms[t] = ens.residual_norm(clean_validation.row(t));
    return calibrate_threshold(norms, false_alarm_rate);
}

int detect(const VirtualSensorEnsemble& ens, std::span<const double> x_t) {
    return ens.residual_norm(x_t) >= ens.zeta ? 1 : 0;
}

Counterfactual explain_alarm(const VirtualSensorEnsemble& ens, std::span<const double> x_t,
                             std::size_t max_support) {
    if (detect(ens, x_t) != 1)
        throw std::invalid_argument("explain_alarm: input does not raise an alarm");
    const std::size_t m = ens.sensors();
    max_support = std::min(max_support, m);

    // Residuals are affine in the input: r(x + delta) = r(x) + M delta with
    // M = coef - I, so each support set reduces to a small least-squares fit.
    const auto r0 = ens.residual(x_t);
    Matrix effect(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            effect.at(i, j) = ens.coef.at(i, j) - (i == j ? 1.0 : 0.0);

    Counterfactual cf;
    cf.x_orig.assign(x_t.begin(), x_t.end());
    cf.delta.assign(m, 0.0);
    cf.y_cf = 0;
    cf.generator = "alarm_repair";

    CostSpec sparsity_spec{2, {}, 1e-9};
    for (std::size_t support = 1; support <= max_support; ++support) {
        std::vector<std::size_t> subset(support);
        std::vector<bool> chooser(m, false);
        std::fill(chooser.begin(), chooser.begin() + static_cast<std::ptrdiff_t>(support),
                  true);
        bool found = false;
        double best_l2 = std::numeric_limits<double>::infinity();
        std::vector<double> best_delta;
        // iterate subsets of the given size via the permutation trick
        do {
            std::size_t idx = 0;
            for (std::size_t j = 0; j < m; ++j)
                if (chooser[j]) subset[idx++] = j;

            Matrix cols(m, support);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t k = 0; k < support; ++k)
                    cols.at(i, k) = effect.at(i, subset[k]);
            std::vector<double> rhs(m);
            for (std::size_t i = 0; i < m; ++i) rhs[i] = -r0[i];
            std::vector<double> sol;
            try {
                sol = lstsq(cols, rhs, 1e-10);
            } catch (const std::runtime_error&) {
                continue; // singular column set
            }
            std::vector<double> delta(m, 0.0);
            for (std::size_t k = 0; k < support; ++k) delta[subset[k]] = sol[k];
            std::vector<double> probe(m);
            for (std::size_t j = 0; j < m; ++j) probe[j] = x_t[j] + delta[j];
            if (ens.residual_norm(probe) < ens.zeta) {
                const double l2 = norm2(delta);
                if (l2 < best_l2) {
                    best_l2 = l2;
                    best_delta = std::move(delta);
                    found = true;
                }
            }
            ++cf.iterations;
        } while (std::prev_permutation(chooser.begin(), chooser.end()));
        if (found) {
            cf.delta = std::move(best_delta);
            cf.valid = true;
            cf.costs = compute_costs(sparsity_spec, cf.delta);
            return cf;
        }
    }
    cf.costs = compute_costs(sparsity_spec, cf.delta);
    return cf; // no subset within max_support: valid stays false
}

// ---------------------------------------------------------------------------
// case study

namespace {

struct FaultySet {
    std::vector<SensorScenario> scenarios;
};

std::vector<FaultSpec> draw_faults(const WdnCaseConfig& cfg, Rng& rng) {
    std::vector<FaultSpec> faults;
    for (std::size_t f = 0; f < cfg.faults_per_scenario; ++f) {
        FaultSpec spec;
        spec.sensor = rng.uniform_index(cfg.sensors);
        const std::size_t latest = cfg.steps_per_scenario - cfg.fault_length;
        spec.start = rng.uniform_index(latest);
        spec.end = spec.start + cfg.fault_length;
        spec.sigma = cfg.fault_sigma;
        faults.push_back(spec);
    }
    return faults;
}

bool in_fault_window(const SensorScenario& s, std::size_t t) {
    for (const auto& f : s.faults)
        if (t >= f.start && t < f.end) return true;
    return false;
}

bool fault_sensor_at(const SensorScenario& s, std::size_t t, std::size_t sensor) {
    for (const auto& f : s.faults)
        if (t >= f.start && t < f.end && f.sensor == sensor) return true;
    return false;
}

struct SparsityEval {
    std::vector<double> sparsity;
    std::size_t true_positives = 0;
    std::size_t localized = 0;
    std::size_t repair_failures = 0;
};

SparsityEval evaluate_repairs(const VirtualSensorEnsemble& ens, const FaultySet& eval_set,
                              const WdnCaseConfig& cfg) {
    SparsityEval out;
    for (const auto& scenario : eval_set.scenarios) {
        for (std::size_t t = 0; t < scenario.readings.rows; ++t) {
            if (!in_fault_window(scenario, t)) continue;
            if (detect(ens, scenario.readings.row(t)) != 1) continue;
            ++out.true_positives;
            auto cf = explain_alarm(ens, scenario.readings.row(t), cfg.sensors);
            if (!cf.valid) {
                ++out.repair_failures;
                // an unrepairable alarm costs the full sensor sweep
                out.sparsity.push_back(static_cast<double>(cfg.sensors));
                continue;
            }
            out.sparsity.push_back(static_cast<double>(cf.costs.sparsity));
            bool hit = false;
            for (std::size_t s = 0; s < cfg.sensors; ++s)
                if (std::fabs(cf.delta[s]) > 1e-9 && fault_sensor_at(scenario, t, s))
                    hit = true;
            if (hit) ++out.localized;
        }
    }
    return out;
}

void append_wdn_record(WdnReport& rep, const std::string& name, std::vector<double> values,
                       double p_value) {
    if (values.empty()) return;
    MetricRecord r;
    r.fold = -1;
    r.budget = 0.0;
    r.name = name;
    r.median = median_of(values);
    r.values = std::move(values);
    r.p_value = p_value;
    r.stars = significance_stars(p_value);
    rep.records.push_back(std::move(r));
}

} // namespace

CaseSets build_case_sets(std::uint64_t seed, const WdnCaseConfig& cfg) {
    CaseSets sets;
    for (std::size_t i = 0; i < cfg.scenarios_per_set; ++i) {
        ScenarioParams params;
        params.observation_noise = cfg.observation_noise;
        params.jitter = cfg.train_jitter;
        params.jitter_stream = 1 + i;
        sets.train.push_back(
            synth_scenario(cfg.sensors, cfg.steps_per_scenario, {}, seed, params));
    }
    Rng attack_faults(derive_seed(seed, 0x2fa));
    for (std::size_t i = 0; i < cfg.scenarios_per_set; ++i) {
        ScenarioParams params;
        params.observation_noise = cfg.observation_noise;
        params.jitter = cfg.train_jitter;
        params.jitter_stream = 11 + i;
        sets.attack.push_back(synth_scenario(cfg.sensors, cfg.steps_per_scenario,
                                             draw_faults(cfg, attack_faults), seed, params));
    }
    Rng eval_faults(derive_seed(seed, 0x3fa));
    for (std::size_t i = 0; i < cfg.scenarios_per_set; ++i) {
        ScenarioParams params;
        params.observation_noise = cfg.observation_noise;
        params.jitter = cfg.eval_jitter;
        params.jitter_stream = 23 + i;
        sets.eval.push_back(synth_scenario(cfg.sensors, cfg.steps_per_scenario,
                                           draw_faults(cfg, eval_faults), seed, params));
    }
    return sets;
}

WdnReport run_case_study(std::uint64_t seed, const WdnCaseConfig& cfg) {
    WdnReport rep;
    rep.config = cfg;
    rep.seed = seed;

    auto sets = build_case_sets(seed, cfg);

    // Set 1: fault-free; fits the virtual sensors and calibrates zeta.
    Matrix train_rows(0, cfg.sensors);
    for (const auto& s : sets.train)
        for (std::size_t t = 0; t < s.readings.rows; ++t)
            train_rows.push_row(s.readings.row(t));
    const Matrix& validation = sets.train.back().readings;

    auto clean_ens = fit_ensemble(train_rows);
    clean_ens.zeta = calibrate_zeta(clean_ens, validation, cfg.false_alarm_rate);

    const auto poison_count = static_cast<std::size_t>(
        std::llround(cfg.poison_budget * static_cast<double>(train_rows.rows)));

    Matrix poisoned_rows = train_rows;
    if (poison_count > 0) {
        // Set 2: faulty; its true positives become the attack targets.
        Dataset target_pool;
        target_pool.features = Matrix(0, cfg.sensors);
        for (const auto& scenario : sets.attack)
            for (std::size_t t = 0; t < scenario.readings.rows; ++t)
                if (in_fault_window(scenario, t) &&
                    detect(clean_ens, scenario.readings.row(t)) == 1)
                    target_pool.features.push_row(scenario.readings.row(t));
        target_pool.labels.assign(target_pool.features.rows, 1); // alarm raised
        target_pool.feature_names.resize(cfg.sensors);
        for (std::size_t s = 0; s < cfg.sensors; ++s)
            target_pool.feature_names[s] = "sensor" + std::to_string(s);
        if (target_pool.size() == 0)
            throw std::runtime_error("case study: no true positives");

        CfEngine engine;
        engine.diverse = [&clean_ens, &cfg](std::span<const double> x, int, std::size_t k,
                                            std::uint64_t) {
            DiverseResult out;
            out.requested = k;
            auto cf = explain_alarm(clean_ens, x, cfg.sensors);
            if (cf.valid)
                out.cfs.push_back(std::move(cf));
            else
                out.failures = k;
            return out;
        };
        engine.boundary_cost = [&clean_ens](std::span<const double> x, std::uint64_t) {
            return clean_ens.residual_norm(x); // unused under uniform sampling
        };

        TargetSpec target{TargetLevel::global, 1, std::nullopt, std::nullopt};
        PoisonConfig pcfg;
        pcfg.n = poison_count;
        pcfg.k = 1;
        pcfg.alpha_steps = 1; // single-point grid sits at b
        pcfg.b = cfg.alpha;
        pcfg.uniform_sampling = true;
        pcfg.seed = derive_seed(seed, 0x90150);

        auto detector_predict = [&clean_ens](std::span<const double> x) {
            return detect(clean_ens, x);
        };
        auto ps =
            generate_poison(target_pool, PredictFn(detector_predict), target, pcfg, engine);
        if (ps.instances.size() > poison_count) ps.instances.resize(poison_count);
        // the refit treats these readings as normal operation: non-alarm rows
        for (auto& inst : ps.instances) inst.y = 0;
        rep.poison_count = ps.instances.size();
        rep.poison_failures = ps.failures;
        for (const auto& inst : ps.instances) poisoned_rows.push_row(inst.z);
    }

    auto poisoned_ens = fit_ensemble(poisoned_rows);
    // the alarm threshold is part of the deployed configuration: the refit
    // replaces the regressions only
    poisoned_ens.zeta = clean_ens.zeta;

    // Set 3: perturbed generator parameters (sim-to-real gap), evaluation only.
    FaultySet eval_set;
    eval_set.scenarios = sets.eval;

    const auto clean_eval = evaluate_repairs(clean_ens, eval_set, cfg);
    const auto poisoned_eval = evaluate_repairs(poisoned_ens, eval_set, cfg);
    rep.true_positives_clean = clean_eval.true_positives;
    rep.true_positives_poisoned = poisoned_eval.true_positives;

    double p_sparsity = 1.0;
    if (!clean_eval.sparsity.empty() && !poisoned_eval.sparsity.empty())
        p_sparsity = mann_whitney_u(poisoned_eval.sparsity, clean_eval.sparsity).p_value;
    append_wdn_record(rep, "sparsity_clean", clean_eval.sparsity, 1.0);
    append_wdn_record(rep, "sparsity_poisoned", poisoned_eval.sparsity, p_sparsity);
    if (clean_eval.true_positives > 0)
        append_wdn_record(rep, "localization_rate_clean",
                          {static_cast<double>(clean_eval.localized) /
                           static_cast<double>(clean_eval.true_positives)},
                          1.0);
    if (poisoned_eval.true_positives > 0)
        append_wdn_record(rep, "localization_rate_poisoned",
                          {static_cast<double>(poisoned_eval.localized) /
                           static_cast<double>(poisoned_eval.true_positives)},
                          1.0);
    return rep;
}

const MetricRecord* WdnReport::find(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

std::string wdn_report_to_json(const WdnReport& rep) {
    JsonWriter w;
    w.begin_object();
    w.key("config");
    w.begin_object();
    w.key("alpha");
    w.value(rep.config.alpha);
    w.key("eval_jitter");
    w.value(rep.config.eval_jitter);
    w.key("false_alarm_rate");
    w.value(rep.config.false_alarm_rate);
    w.key("fault_length");
    w.value(rep.config.fault_length);
    w.key("fault_sigma");
    w.value(rep.config.fault_sigma);
    w.key("faults_per_scenario");
    w.value(rep.config.faults_per_scenario);
    w.key("observation_noise");
    w.value(rep.config.observation_noise);
    w.key("poison_budget");
    w.value(rep.config.poison_budget);
    w.key("scenarios_per_set");
    w.value(rep.config.scenarios_per_set);
    w.key("sensors");
    w.value(rep.config.sensors);
    w.key("steps_per_scenario");
    w.value(rep.config.steps_per_scenario);
    w.key("train_jitter");
    w.value(rep.config.train_jitter);
    w.end_object();
    w.key("poison_count");
    w.value(rep.poison_count);
    w.key("poison_failures");
    w.value(rep.poison_failures);
    w.key("records");
    w.begin_array();
    for (const auto& r : rep.records) {
        w.begin_object();
        w.key("median");
        w.value(r.median);
        w.key("name");
        w.value(r.name);
        w.key("p_value");
        w.value(r.p_value);
        w.key("stars");
        w.value(r.stars);
        w.key("values");
        w.value(std::span<const double>(r.values));
        w.end_object();
    }
    w.end_array();
    w.key("schema_version");
    w.value(rep.schema_version);
    w.key("seed");
    w.value(rep.seed);
    w.key("true_positives_clean");
    w.value(rep.true_positives_clean);
    w.key("true_positives_poisoned");
    w.value(rep.true_positives_poisoned);
    w.end_object();
    return w.take();
}

std::string scenario_to_csv(const SensorScenario& scenario) {
    std::string out;
    for (std::size_t s = 0; s < scenario.readings.cols; ++s) {
        if (s) out += ",";
        out += "sensor" + std::to_string(s);
    }
    out += "\n";
    for (std::size_t t = 0; t < scenario.readings.rows; ++t) {
        for (std::size_t s = 0; s < scenario.readings.cols; ++s) {
            if (s) out += ",";
            out += format_double(scenario.readings.at(t, s));
        }
        out += "\n";
    }
    return out;
}

std::string scenario_faults_to_json(const SensorScenario& scenario) {
    JsonWriter w;
    w.begin_object();
    w.key("faults");
    w.begin_array();
    for (const auto& f : scenario.faults) {
        w.begin_object();
        w.key("end");
        w.value(f.end);
        w.key("sensor");
        w.value(f.sensor);
        w.key("sigma");
        w.value(f.sigma);
        w.key("start");
        w.value(f.start);
        w.end_object();
    }
    w.end_array();
    w.key("seed");
    w.value(scenario.seed);
    w.end_object();
    return w.take();
}

} // namespace rlab
