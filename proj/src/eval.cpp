#include "rlab/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "rlab/json_io.hpp"
#include "rlab/rng.hpp"
#include "rlab/stats.hpp"
#include "rlab/svg.hpp"

#include <nlohmann/json.hpp>

namespace rlab {

std::string to_string(CfMethod m) {
    switch (m) {
        case CfMethod::nun: return "nun";
        case CfMethod::gradcf: return "gradcf";
        case CfMethod::diverse: return "diverse";
        case CfMethod::proto: return "proto";
    }
    throw std::logic_error("unknown cf method");
}

CfMethod cf_method_from_string(const std::string& s) {
    if (s == "nun") return CfMethod::nun;
    if (s == "gradcf") return CfMethod::gradcf;
    if (s == "diverse") return CfMethod::diverse;
    if (s == "proto") return CfMethod::proto;
    throw std::invalid_argument("unknown cf method: " + s);
}

std::string to_string(AttackKind a) {
    return a == AttackKind::algorithm1 ? "algorithm1" : "label_flip";
}

AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "algorithm1") return AttackKind::algorithm1;
    if (s == "label_flip") return AttackKind::label_flip;
    throw std::invalid_argument("unknown attack kind: " + s);
}

void ExperimentConfig::validate() const {
    if (folds < 2) throw std::invalid_argument("config: folds must be >= 2");
    for (double b : budgets)
        if (!(b >= 0.0) || !(b <= 1.0))
            throw std::invalid_argument("config: budgets must lie in [0,1]");
    if (poison_k < 1 || alpha_steps < 1 || poison_b < 1.0)
        throw std::invalid_argument("config: poison hyperparameters out of range");
    target.validate();
    if (data.kind == DataSource::Kind::synthetic) {
        if (data.n < 4 || data.d < 1 || !(data.separation > 0.0))
            throw std::invalid_argument("config: bad synthetic data parameters");
    } else if (data.path.empty() || data.target_column.empty()) {
        throw std::invalid_argument("config: csv source needs path and target column");
    }
}

double cost_diff_pct(double cost_poisoned, double cost_clean) {
    if (!(cost_clean > 0.0))
        throw std::invalid_argument("cost_diff_pct: clean cost must be positive");
    return cost_poisoned / cost_clean - 1.0;
}

std::optional<double> subgroup_gap_pct(std::span<const double> clean_g0,
                                       std::span<const double> clean_g1,
                                       std::span<const double> poisoned_g0,
                                       std::span<const double> poisoned_g1) {
    if (clean_g0.empty() || clean_g1.empty() || poisoned_g0.empty() || poisoned_g1.empty())
        throw std::invalid_argument("subgroup_gap_pct: all four samples must be non-empty");
    const double clean_gap =
        std::fabs(median_of({clean_g0.begin(), clean_g0.end()}) -
                  median_of({clean_g1.begin(), clean_g1.end()}));
    if (clean_gap == 0.0) return std::nullopt;
    const double poisoned_gap =
        std::fabs(median_of({poisoned_g0.begin(), poisoned_g0.end()}) -
                  median_of({poisoned_g1.begin(), poisoned_g1.end()}));
    return poisoned_gap / clean_gap - 1.0;
}

const MetricRecord* ExperimentReport::find(const std::string& name, double budget,
                                           int fold) const {
    for (const auto& r : records)
        if (r.name == name && r.budget == budget && r.fold == fold) return &r;
    return nullptr;
}

// ---------------------------------------------------------------------------
// per-fold execution

namespace {

struct CfReading {
    bool valid = false;
    double cost = 0.0;
    int sparsity = 0;
    std::vector<double> endpoint;
};

struct BudgetSamples {
    double budget = 0.0;
    std::vector<double> cost_clean, cost_poisoned, diff_pct;
    std::vector<double> spars_clean, spars_poisoned, spars_diff;
    std::vector<double> ll_clean, ll_poisoned, ll_diff;
    std::vector<int> group; // sensitive value per paired instance (-1 if absent)
    double f1_clean = 0.0, f1_poisoned = 0.0;
    std::optional<double> subgroup_gap;
    std::vector<double> spill_diff_pct; // local level: untargeted instances
    std::optional<double> targeted_diff_pct;
    std::size_t cf_failures = 0;
    std::size_t zero_cost_exclusions = 0;
    std::size_t poison_failures = 0;
};

struct FoldOutcome {
    std::vector<BudgetSamples> budgets;
    std::size_t counterfactuals = 0;
    std::size_t models = 0;
};

CfReading read_cf(CfMethod method, const TrainedModel& m, const Dataset& reference,
                  std::span<const double> x, int y_cf, const CostSpec& c,
                  GenOptions opts) {
    Counterfactual cf;
    switch (method) {
        case CfMethod::nun:
            cf = generate_nun(m, reference, x, y_cf, c);
            break;
        case CfMethod::gradcf:
            cf = generate_gradcf(m, x, y_cf, c, opts);
            break;
        case CfMethod::diverse: {
            auto set = generate_diverse(m, x, y_cf, c, 3, opts);
            double best = std::numeric_limits<double>::infinity();
            for (auto& candidate : set.cfs) {
                const double cc = cost(c, candidate.delta);
                if (cc < best) {
                    best = cc;
                    cf = std::move(candidate);
                }
            }
            break;
        }
        case CfMethod::proto:
            cf = generate_proto(m, reference, x, y_cf, c, opts);
            break;
    }
    CfReading reading;
    reading.valid = cf.valid;
    if (cf.valid) {
        reading.cost = cost(c, cf.delta);
        reading.sparsity = cost_sparsity(c, cf.delta);
        reading.endpoint = cf.endpoint();
    }
    return reading;
}

double f1_of(const TrainedModel& m, const Matrix& features, std::span<const int> labels) {
    std::vector<int> preds(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) preds[i] = m.predict(features.row(i));
    return f1_score(preds, labels);
}

FoldOutcome run_fold(const ExperimentConfig& cfg, const Dataset& ds, const FoldPlan& plan,
                     std::size_t fold) {
    FoldOutcome outcome;

    const auto train_idx = plan.train_indices(fold);
    const auto test_idx = plan.test_indices(fold);
    Dataset train = ds.subset(train_idx);

    std::size_t zeros = 0, ones = 0;
    for (int y : train.labels) (y == 0 ? zeros : ones)++;
    if (zeros != ones)
        train = undersample_majority(train, derive_seed(cfg.seed, 0xba1, fold));

    std::vector<std::size_t> all_rows(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) all_rows[i] = i;
    auto [standardizer, train_std] = standardize(train, all_rows);

    Dataset test = ds.subset(test_idx);
    test.features = standardizer.apply(test.features);

    ClassifierSpec spec = cfg.classifier;
    spec.seed = derive_seed(cfg.seed, 0x30de1, fold);
    const auto clean_model = fit(spec, train_std);
    ++outcome.models;

    // negatively classified test rows get explanations (y_cf = favorable 1)
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (clean_model.predict(test.features.row(i)) == 0) negatives.push_back(i);

    std::vector<CfReading> clean_cfs(negatives.size());
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        GenOptions opts = cfg.gen;
        opts.seed = derive_seed(cfg.seed, 0xcf0 + fold, i);
        clean_cfs[i] = read_cf(cfg.cf_method, clean_model, train_std,
                               test.features.row(negatives[i]), 1, cfg.cost, opts);
        ++outcome.counterfactuals;
    }
    const double f1_clean = f1_of(clean_model, test.features, test.labels);

    std::vector<double> clean_ll(negatives.size(), 0.0);
    {
        Matrix endpoints(0, ds.dim());
        std::vector<std::size_t> which;
        for (std::size_t i = 0; i < negatives.size(); ++i)
            if (clean_cfs[i].valid) {
                endpoints.push_row(clean_cfs[i].endpoint);
                which.push_back(i);
            }
        if (endpoints.rows > 0) {
            const auto ll = kde_loglik(train_std.features, endpoints);
            for (std::size_t k = 0; k < which.size(); ++k) clean_ll[which[k]] = ll[k];
        }
    }

    for (std::size_t bi = 0; bi < cfg.budgets.size(); ++bi) {
        const double budget = cfg.budgets[bi];
        BudgetSamples samples;
        samples.budget = budget;

        Dataset train_attacked = train_std;
        const auto emitted = static_cast<std::size_t>(
            std::llround(budget * static_cast<double>(train_std.size())));
        if (emitted > 0 && cfg.attack == AttackKind::algorithm1) {
            PoisonConfig pcfg;
            pcfg.k = cfg.poison_k;
            pcfg.b = cfg.poison_b;
            pcfg.alpha_steps = cfg.alpha_steps;
            pcfg.n = (emitted + cfg.poison_k * cfg.alpha_steps - 1) /
                     (cfg.poison_k * cfg.alpha_steps);
            pcfg.uniform_sampling = cfg.uniform_sampling;
            pcfg.seed = derive_seed(cfg.seed, 0xa17a, fold, bi);

            GenOptions attacker = cfg.gen;
            const auto engine = default_cf_engine(clean_model, cfg.cost, attacker);
            // local targets live in the test set; group targets in the train set
            const Dataset& pool = cfg.target.level == TargetLevel::local ? test : train_std;
            auto ps = generate_poison(pool, clean_model, cfg.target, pcfg, engine);
            samples.poison_failures = ps.failures;
            if (ps.instances.size() > emitted) ps.instances.resize(emitted);
            train_attacked = ps.append_to(train_std);
        } else if (emitted > 0 && cfg.attack == AttackKind::label_flip) {
            train_attacked =
                label_flip_poison(train_std, budget, derive_seed(cfg.seed, 0xf11b, fold, bi))
                    .data;
        }

        const auto poisoned_model = fit(spec, train_attacked);
        ++outcome.models;
        samples.f1_clean = f1_clean;
        samples.f1_poisoned = f1_of(poisoned_model, test.features, test.labels);

        std::vector<CfReading> pois_cfs(negatives.size());
        for (std::size_t i = 0; i < negatives.size(); ++i) {
            GenOptions opts = cfg.gen;
            opts.seed = derive_seed(cfg.seed, 0xcf0 + fold, i); // same seeds as clean pass
            pois_cfs[i] = read_cf(cfg.cf_method, poisoned_model, train_attacked,
                                  test.features.row(negatives[i]), 1, cfg.cost, opts);
            ++outcome.counterfactuals;
        }

        std::vector<double> pois_ll(negatives.size(), 0.0);
        {
            Matrix endpoints(0, ds.dim());
            std::vector<std::size_t> which;
            for (std::size_t i = 0; i < negatives.size(); ++i)
                if (pois_cfs[i].valid) {
                    endpoints.push_row(pois_cfs[i].endpoint);
                    which.push_back(i);
                }
            if (endpoints.rows > 0) {
                // plausibility stays measured against the clean data manifold
                const auto ll = kde_loglik(train_std.features, endpoints);
                for (std::size_t k = 0; k < which.size(); ++k) pois_ll[which[k]] = ll[k];
            }
        }

        for (std::size_t i = 0; i < negatives.size(); ++i) {
            if (!clean_cfs[i].valid || !pois_cfs[i].valid) {
                ++samples.cf_failures;
                continue;
            }
            if (!(clean_cfs[i].cost > 0.0)) {
                ++samples.zero_cost_exclusions;
                continue;
            }
            const double diff = cost_diff_pct(pois_cfs[i].cost, clean_cfs[i].cost);
            const bool targeted = cfg.target.level == TargetLevel::local &&
                                  negatives[i] == *cfg.target.local_index;
            samples.cost_clean.push_back(clean_cfs[i].cost);
            samples.cost_poisoned.push_back(pois_cfs[i].cost);
            samples.diff_pct.push_back(diff);
            samples.spars_clean.push_back(clean_cfs[i].sparsity);
            samples.spars_poisoned.push_back(pois_cfs[i].sparsity);
            samples.spars_diff.push_back(pois_cfs[i].sparsity - clean_cfs[i].sparsity);
            samples.ll_clean.push_back(clean_ll[i]);
            samples.ll_poisoned.push_back(pois_ll[i]);
            samples.ll_diff.push_back(pois_ll[i] - clean_ll[i]);
            samples.group.push_back(ds.has_sensitive() ? ds.sensitive[test_idx[negatives[i]]]
                                                       : -1);
            if (cfg.target.level == TargetLevel::local) {
                if (targeted)
                    samples.targeted_diff_pct = diff;
                else
                    samples.spill_diff_pct.push_back(diff);
            }
        }

        if (cfg.target.level == TargetLevel::subgroup && ds.has_sensitive()) {
            std::vector<double> c0, c1, p0, p1;
            for (std::size_t i = 0; i < samples.cost_clean.size(); ++i) {
                if (samples.group[i] == 0) {
                    c0.push_back(samples.cost_clean[i]);
                    p0.push_back(samples.cost_poisoned[i]);
                } else if (samples.group[i] == 1) {
                    c1.push_back(samples.cost_clean[i]);
                    p1.push_back(samples.cost_poisoned[i]);
                }
            }
            if (!c0.empty() && !c1.empty()) samples.subgroup_gap = subgroup_gap_pct(c0, c1, p0, p1);
        }

        outcome.budgets.push_back(std::move(samples));
    }
    return outcome;
}

void append_record(std::vector<MetricRecord>& records, int fold, double budget,
                   const std::string& name, std::vector<double> values, double p_value) {
    if (values.empty()) return;
    MetricRecord r;
    r.fold = fold;
    r.budget = budget;
    r.name = name;
    r.median = median_of(values);
    r.values = std::move(values);
    r.p_value = p_value;
    r.stars = significance_stars(p_value);
    records.push_back(std::move(r));
}

double shift_p(const std::vector<double>& poisoned, const std::vector<double>& clean) {
    if (poisoned.empty() || clean.empty()) return 1.0;
    return mann_whitney_u(poisoned, clean).p_value;
}

void build_records(const ExperimentConfig& cfg, const BudgetSamples& s, int fold,
                   std::vector<MetricRecord>& records) {
    const double p_cost = shift_p(s.cost_poisoned, s.cost_clean);
    append_record(records, fold, s.budget, "cost_recourse_clean", s.cost_clean, 1.0);
    append_record(records, fold, s.budget, "cost_recourse_poisoned", s.cost_poisoned, p_cost);
    append_record(records, fold, s.budget, "cost_diff_pct", s.diff_pct, p_cost);
    append_record(records, fold, s.budget, "sparsity_diff", s.spars_diff,
                  shift_p(s.spars_poisoned, s.spars_clean));
    append_record(records, fold, s.budget, "kde_loglik_diff", s.ll_diff,
                  shift_p(s.ll_poisoned, s.ll_clean));
    append_record(records, fold, s.budget, "f1_clean", {s.f1_clean}, 1.0);
    append_record(records, fold, s.budget, "f1_poisoned", {s.f1_poisoned}, 1.0);
    if (s.subgroup_gap) {
        std::vector<double> p0, p1;
        for (std::size_t i = 0; i < s.cost_poisoned.size(); ++i)
            (s.group[i] == 0 ? p0 : p1).push_back(s.cost_poisoned[i]);
        append_record(records, fold, s.budget, "subgroup_gap_pct", {*s.subgroup_gap},
                      p0.empty() || p1.empty() ? 1.0 : mann_whitney_u(p0, p1).p_value);
    }
    if (cfg.target.level == TargetLevel::local) {
        append_record(records, fold, s.budget, "spillover_cost_diff_pct", s.spill_diff_pct,
                      1.0);
        if (s.targeted_diff_pct)
            append_record(records, fold, s.budget, "targeted_cost_diff_pct",
                          {*s.targeted_diff_pct}, 1.0);
    }
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    Dataset ds;
    if (cfg.data.kind == DataSource::Kind::synthetic) {
        ds = make_synthetic_gaussians(cfg.data.n, cfg.data.d, cfg.data.separation,
                                      derive_seed(cfg.seed, 0xda7a));
    } else {
        ds = load_csv(cfg.data.path, cfg.data.target_column, cfg.data.sensitive_column);
    }
    const auto plan = kfold(ds, cfg.folds, derive_seed(cfg.seed, 0xf01d));

    std::vector<FoldOutcome> outcomes(cfg.folds);
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, cfg.folds));
    if (workers == 1) {
        for (std::size_t f = 0; f < cfg.folds; ++f) outcomes[f] = run_fold(cfg, ds, plan, f);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t f = next.fetch_add(1);
                if (f >= cfg.folds) return;
                try {
                    outcomes[f] = run_fold(cfg, ds, plan, f);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }

    ExperimentReport report;
    report.config = cfg;
    report.seed = cfg.seed;

    for (std::size_t f = 0; f < cfg.folds; ++f) {
        report.counterfactuals_computed += outcomes[f].counterfactuals;
        report.models_trained += outcomes[f].models;
        for (const auto& s : outcomes[f].budgets) {
            report.cf_failures += s.cf_failures;
            report.zero_cost_exclusions += s.zero_cost_exclusions;
            report.poison_failures += s.poison_failures;
            build_records(cfg, s, static_cast<int>(f), report.records);
        }
    }

    // pooled records across folds per budget
    for (std::size_t bi = 0; bi < cfg.budgets.size(); ++bi) {
        BudgetSamples pooled;
        pooled.budget = cfg.budgets[bi];
        std::vector<double> f1c, f1p, gaps, targeted;
        for (std::size_t f = 0; f < cfg.folds; ++f) {
            const auto& s = outcomes[f].budgets[bi];
            auto extend = [](std::vector<double>& dst, const std::vector<double>& src) {
                dst.insert(dst.end(), src.begin(), src.end());
            };
            extend(pooled.cost_clean, s.cost_clean);
            extend(pooled.cost_poisoned, s.cost_poisoned);
            extend(pooled.diff_pct, s.diff_pct);
            extend(pooled.spars_clean, s.spars_clean);
            extend(pooled.spars_poisoned, s.spars_poisoned);
            extend(pooled.spars_diff, s.spars_diff);
            extend(pooled.ll_clean, s.ll_clean);
            extend(pooled.ll_poisoned, s.ll_poisoned);
            extend(pooled.ll_diff, s.ll_diff);
            extend(pooled.spill_diff_pct, s.spill_diff_pct);
            pooled.group.insert(pooled.group.end(), s.group.begin(), s.group.end());
            f1c.push_back(s.f1_clean);
            f1p.push_back(s.f1_poisoned);
            if (s.subgroup_gap) gaps.push_back(*s.subgroup_gap);
            if (s.targeted_diff_pct) targeted.push_back(*s.targeted_diff_pct);
        }
        const double p_cost = shift_p(pooled.cost_poisoned, pooled.cost_clean);
        append_record(report.records, -1, pooled.budget, "cost_recourse_clean",
                      pooled.cost_clean, 1.0);
        append_record(report.records, -1, pooled.budget, "cost_recourse_poisoned",
                      pooled.cost_poisoned, p_cost);
        append_record(report.records, -1, pooled.budget, "cost_diff_pct", pooled.diff_pct,
                      p_cost);
        append_record(report.records, -1, pooled.budget, "sparsity_diff", pooled.spars_diff,
                      shift_p(pooled.spars_poisoned, pooled.spars_clean));
        append_record(report.records, -1, pooled.budget, "kde_loglik_diff", pooled.ll_diff,
                      shift_p(pooled.ll_poisoned, pooled.ll_clean));
        append_record(report.records, -1, pooled.budget, "f1_clean", f1c, 1.0);
        append_record(report.records, -1, pooled.budget, "f1_poisoned", f1p, 1.0);
        append_record(report.records, -1, pooled.budget, "subgroup_gap_pct", gaps, 1.0);
        append_record(report.records, -1, pooled.budget, "spillover_cost_diff_pct",
                      pooled.spill_diff_pct, 1.0);
        append_record(report.records, -1, pooled.budget, "targeted_cost_diff_pct", targeted,
                      1.0);
    }

    std::sort(report.records.begin(), report.records.end(),
              [](const MetricRecord& a, const MetricRecord& b) {
                  if (a.budget != b.budget) return a.budget < b.budget;
                  if (a.fold != b.fold) return a.fold < b.fold;
                  return a.name < b.name;
              });
    return report;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

void write_gen_options(JsonWriter& w, const GenOptions& g) {
    w.begin_object();
    w.key("anneal_rounds");
    w.value(g.anneal_rounds);
    w.key("budget");
    w.value(g.budget);
    w.key("c_init");
    w.value(g.c_init);
    w.key("step");
    w.value(g.step);
    w.end_object();
}

void write_config(JsonWriter& w, const ExperimentConfig& cfg) {
    w.begin_object();
    w.key("attack");
    w.value(to_string(cfg.attack));
    w.key("budgets");
    w.begin_array();
    for (double b : cfg.budgets) w.value(b);
    w.end_array();
    w.key("cf_method");
    w.value(to_string(cfg.cf_method));
    w.key("classifier");
    w.begin_object();
    w.key("forest");
    w.begin_object();
    w.key("feature_subsample");
    w.value(cfg.classifier.forest.feature_subsample);
    w.key("max_depth");
    w.value(cfg.classifier.forest.max_depth);
    w.key("min_leaf");
    w.value(cfg.classifier.forest.min_leaf);
    w.key("trees");
    w.value(cfg.classifier.forest.trees);
    w.end_object();
    w.key("kind");
    w.value(to_string(cfg.classifier.kind));
    w.key("knn");
    w.begin_object();
    w.key("k");
    w.value(cfg.classifier.knn.k);
    w.end_object();
    w.key("mlp");
    w.begin_object();
    w.key("batch");
    w.value(cfg.classifier.mlp.batch);
    w.key("epochs");
    w.value(cfg.classifier.mlp.epochs);
    w.key("hidden");
    w.begin_array();
    for (std::size_t h : cfg.classifier.mlp.hidden) w.value(h);
    w.end_array();
    w.key("momentum");
    w.value(cfg.classifier.mlp.momentum);
    w.key("step");
    w.value(cfg.classifier.mlp.step);
    w.end_object();
    w.key("svm");
    w.begin_object();
    w.key("epochs");
    w.value(cfg.classifier.svm.epochs);
    w.key("reg_weight");
    w.value(cfg.classifier.svm.reg_weight);
    w.key("step0");
    w.value(cfg.classifier.svm.step0);
    w.end_object();
    w.end_object();
    w.key("cost");
    w.begin_object();
    w.key("p");
    w.value(cfg.cost.p);
    w.key("sparsity_tol");
    w.value(cfg.cost.sparsity_tol);
    w.key("weights");
    w.value(std::span<const double>(cfg.cost.weights));
    w.end_object();
    w.key("data");
    w.begin_object();
    if (cfg.data.kind == DataSource::Kind::synthetic) {
        w.key("d");
        w.value(cfg.data.d);
        w.key("kind");
        w.value("synthetic");
        w.key("n");
        w.value(cfg.data.n);
        w.key("separation");
        w.value(cfg.data.separation);
    } else {
        w.key("kind");
        w.value("csv");
        w.key("path");
        w.value(cfg.data.path);
        if (cfg.data.sensitive_column) {
            w.key("sensitive_column");
            w.value(*cfg.data.sensitive_column);
        }
        w.key("target_column");
        w.value(cfg.data.target_column);
    }
    w.end_object();
    w.key("folds");
    w.value(cfg.folds);
    w.key("gen");
    write_gen_options(w, cfg.gen);
    w.key("poison");
    w.begin_object();
    w.key("alpha_steps");
    w.value(cfg.alpha_steps);
    w.key("b");
    w.value(cfg.poison_b);
    w.key("k");
    w.value(cfg.poison_k);
    w.end_object();
    w.key("sampling");
    w.value(cfg.uniform_sampling ? "uniform" : "boundary_weighted");
    w.key("seed");
    w.value(cfg.seed);
    w.key("target");
    w.begin_object();
    w.key("level");
    w.value(to_string(cfg.target.level));
    if (cfg.target.local_index) {
        w.key("local_index");
        w.value(*cfg.target.local_index);
    }
    if (cfg.target.subgroup_value) {
        w.key("subgroup_value");
        w.value(*cfg.target.subgroup_value);
    }
    w.key("y");
    w.value(cfg.target.y);
    w.end_object();
    w.end_object();
}

} // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    JsonWriter w;
    write_config(w, cfg);
    return w.take();
}

ExperimentConfig config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("attack")) cfg.attack = attack_kind_from_string(j.at("attack"));
    if (j.contains("budgets")) cfg.budgets = j.at("budgets").get<std::vector<double>>();
    if (j.contains("cf_method")) cfg.cf_method = cf_method_from_string(j.at("cf_method"));
    if (j.contains("classifier")) {
        const auto& jc = j.at("classifier");
        cfg.classifier.kind = classifier_kind_from_string(jc.at("kind"));
        if (jc.contains("knn")) cfg.classifier.knn.k = jc.at("knn").value("k", 1u);
        if (jc.contains("svm")) {
            const auto& js = jc.at("svm");
            cfg.classifier.svm.epochs = js.value("epochs", cfg.classifier.svm.epochs);
            cfg.classifier.svm.reg_weight =
                js.value("reg_weight", cfg.classifier.svm.reg_weight);
            cfg.classifier.svm.step0 = js.value("step0", cfg.classifier.svm.step0);
        }
        if (jc.contains("forest")) {
            const auto& jf = jc.at("forest");
            cfg.classifier.forest.feature_subsample =
                jf.value("feature_subsample", cfg.classifier.forest.feature_subsample);
            cfg.classifier.forest.max_depth =
                jf.value("max_depth", cfg.classifier.forest.max_depth);
            cfg.classifier.forest.min_leaf =
                jf.value("min_leaf", cfg.classifier.forest.min_leaf);
            cfg.classifier.forest.trees = jf.value("trees", cfg.classifier.forest.trees);
        }
        if (jc.contains("mlp")) {
            const auto& jm = jc.at("mlp");
            cfg.classifier.mlp.batch = jm.value("batch", cfg.classifier.mlp.batch);
            cfg.classifier.mlp.epochs = jm.value("epochs", cfg.classifier.mlp.epochs);
            if (jm.contains("hidden"))
                cfg.classifier.mlp.hidden = jm.at("hidden").get<std::vector<std::size_t>>();
            cfg.classifier.mlp.momentum = jm.value("momentum", cfg.classifier.mlp.momentum);
            cfg.classifier.mlp.step = jm.value("step", cfg.classifier.mlp.step);
        }
    }
    if (j.contains("cost")) {
        const auto& jc = j.at("cost");
        cfg.cost.p = jc.value("p", 1);
        cfg.cost.sparsity_tol = jc.value("sparsity_tol", 1e-6);
        if (jc.contains("weights"))
            cfg.cost.weights = jc.at("weights").get<std::vector<double>>();
    }
    if (j.contains("data")) {
        const auto& jd = j.at("data");
        const std::string kind = jd.value("kind", "synthetic");
        if (kind == "synthetic") {
            cfg.data.kind = DataSource::Kind::synthetic;
            cfg.data.n = jd.value("n", cfg.data.n);
            cfg.data.d = jd.value("d", cfg.data.d);
            cfg.data.separation = jd.value("separation", cfg.data.separation);
        } else if (kind == "csv") {
            cfg.data.kind = DataSource::Kind::csv;
            cfg.data.path = jd.at("path").get<std::string>();
            cfg.data.target_column = jd.at("target_column").get<std::string>();
            if (jd.contains("sensitive_column"))
                cfg.data.sensitive_column = jd.at("sensitive_column").get<std::string>();
        } else {
            throw std::invalid_argument("config: unknown data kind " + kind);
        }
    }
    if (j.contains("folds")) cfg.folds = j.at("folds").get<std::size_t>();
    if (j.contains("gen")) {
        const auto& jg = j.at("gen");
        cfg.gen.anneal_rounds = jg.value("anneal_rounds", cfg.gen.anneal_rounds);
        cfg.gen.budget = jg.value("budget", cfg.gen.budget);
        cfg.gen.c_init = jg.value("c_init", cfg.gen.c_init);
        cfg.gen.step = jg.value("step", cfg.gen.step);
    }
    if (j.contains("poison")) {
        const auto& jp = j.at("poison");
        cfg.alpha_steps = jp.value("alpha_steps", cfg.alpha_steps);
        cfg.poison_b = jp.value("b", cfg.poison_b);
        cfg.poison_k = jp.value("k", cfg.poison_k);
    }
    if (j.contains("sampling"))
        cfg.uniform_sampling = j.at("sampling").get<std::string>() == "uniform";
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("target")) {
        const auto& jt = j.at("target");
        cfg.target.level = target_level_from_string(jt.value("level", "global"));
        cfg.target.y = jt.value("y", 0);
        if (jt.contains("subgroup_value"))
            cfg.target.subgroup_value = jt.at("subgroup_value").get<int>();
        if (jt.contains("local_index"))
            cfg.target.local_index = jt.at("local_index").get<std::size_t>();
    }
    cfg.validate();
    return cfg;
}

std::string report_to_json(const ExperimentReport& rep) {
    JsonWriter w;
    w.begin_object();
    w.key("cf_failures");
    w.value(rep.cf_failures);
    w.key("config");
    write_config(w, rep.config);
    w.key("counterfactuals_computed");
    w.value(rep.counterfactuals_computed);
    w.key("models_trained");
    w.value(rep.models_trained);
    w.key("poison_failures");
    w.value(rep.poison_failures);
    w.key("records");
    w.begin_array();
    for (const auto& r : rep.records) {
        w.begin_object();
        w.key("budget");
        w.value(r.budget);
        w.key("fold");
        w.value(r.fold);
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
    w.key("zero_cost_exclusions");
    w.value(rep.zero_cost_exclusions);
    w.end_object();
    return w.take();
}

ExperimentReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentReport rep;
    rep.config = config_from_json(j.at("config").dump());
    rep.cf_failures = j.at("cf_failures").get<std::size_t>();
    rep.poison_failures = j.at("poison_failures").get<std::size_t>();
    rep.zero_cost_exclusions = j.at("zero_cost_exclusions").get<std::size_t>();
    rep.counterfactuals_computed = j.at("counterfactuals_computed").get<std::size_t>();
    rep.models_trained = j.at("models_trained").get<std::size_t>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.schema_version = j.at("schema_version").get<int>();
    for (const auto& jr : j.at("records")) {
        MetricRecord r;
        r.budget = jr.at("budget").get<double>();
        r.fold = jr.at("fold").get<int>();
        r.median = jr.at("median").get<double>();
        r.name = jr.at("name").get<std::string>();
        r.p_value = jr.at("p_value").get<double>();
        r.stars = jr.at("stars").get<std::string>();
        r.values = jr.at("values").get<std::vector<double>>();
        rep.records.push_back(std::move(r));
    }
    return rep;
}

std::string report_to_csv(const ExperimentReport& rep) {
    std::string out = "budget,fold,metric,count,median,p_value,stars\n";
    for (const auto& r : rep.records) {
        out += format_double(r.budget) + ",";
        out += std::to_string(r.fold) + ",";
        out += r.name + ",";
        out += std::to_string(r.values.size()) + ",";
        out += format_double(r.median) + ",";
        out += format_double(r.p_value) + ",";
        out += r.stars + "\n";
    }
    return out;
}

EmittedFiles emit_report(const ExperimentReport& rep, const std::string& out_dir,
                         const std::vector<std::string>& formats) {
    std::filesystem::create_directories(out_dir);
    EmittedFiles files;
    for (const auto& format : formats) {
        std::string path, content;
        if (format == "json") {
            path = out_dir + "/report.json";
            content = report_to_json(rep);
        } else if (format == "csv") {
            path = out_dir + "/report.csv";
            content = report_to_csv(rep);
        } else if (format == "svg") {
            path = out_dir + "/report.svg";
            content = render_report_svg(rep);
        } else {
            throw std::invalid_argument("unknown report format: " + format);
        }
        write_file(path, content);
        files.paths.push_back(path);
    }
    return files;
}

} // namespace rlab
