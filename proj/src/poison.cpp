#include "rlab/poison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "models_impl.hpp"
#include "rlab/json_io.hpp"
#include "rlab/rng.hpp"

#include <nlohmann/json.hpp>

namespace rlab {

std::string to_string(TargetLevel level) {
    switch (level) {
        case TargetLevel::global: return "global";
        case TargetLevel::subgroup: return "subgroup";
        case TargetLevel::local: return "local";
    }
    throw std::logic_error("unknown target level");
}

TargetLevel target_level_from_string(const std::string& s) {
    if (s == "global") return TargetLevel::global;
    if (s == "subgroup") return TargetLevel::subgroup;
    if (s == "local") return TargetLevel::local;
    throw std::invalid_argument("unknown target level: " + s);
}

void TargetSpec::validate() const {
    if (y != 0 && y != 1) throw std::invalid_argument("target: y outside {0,1}");
    if ((level == TargetLevel::subgroup) != subgroup_value.has_value())
        throw std::invalid_argument("target: subgroup_value present iff level=subgroup");
    if ((level == TargetLevel::local) != local_index.has_value())
        throw std::invalid_argument("target: local_index present iff level=local");
}

Dataset PoisonSet::append_to(const Dataset& train) const {
    Dataset out = train;
    for (const auto& inst : instances) {
        out.features.push_row(inst.z);
        out.labels.push_back(inst.y);
        if (!out.sensitive.empty()) out.sensitive.push_back(0);
    }
    out.provenance += "; poisoned(" + std::to_string(instances.size()) + ")";
    return out;
}

std::vector<double> alpha_grid(double b, std::size_t steps) {
    if (b < 1.0) throw std::invalid_argument("alpha grid: b must be >= 1");
    if (steps < 1) throw std::invalid_argument("alpha grid: steps must be >= 1");
    if (steps == 1) return {b};
    std::vector<double> grid(steps);
    for (std::size_t i = 0; i < steps; ++i)
        grid[i] = 1.0 + (b - 1.0) * static_cast<double>(i) / static_cast<double>(steps - 1);
    return grid;
}

std::vector<std::size_t> build_target_set(const Dataset& ds, const PredictFn& predict,
                                          const TargetSpec& t) {
    t.validate();
    std::vector<std::size_t> out;
    if (t.level == TargetLevel::local) {
        if (*t.local_index >= ds.size())
            throw std::invalid_argument("target: local_index out of range");
        out.push_back(*t.local_index);
        return out;
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (predict(ds.features.row(i)) != t.y) continue;
        if (t.level == TargetLevel::subgroup) {
            if (ds.sensitive.empty())
                throw std::invalid_argument("target: subgroup level needs a sensitive column");
            if (ds.sensitive[i] != *t.subgroup_value) continue;
        }
        out.push_back(i);
    }
    if (out.empty()) throw std::runtime_error("target set is empty");
    return out;
}

std::vector<std::size_t> build_target_set(const Dataset& ds, const TrainedModel& m,
                                          const TargetSpec& t) {
    return build_target_set(
        ds, PredictFn([&m](std::span<const double> x) { return m.predict(x); }), t);
}

std::vector<double> sample_weights(std::span<const double> distances) {
    std::vector<double> w(distances.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        const double d = distances[i];
        if (std::isinf(d)) continue;
        if (!(d > 0.0)) throw std::invalid_argument("sample_weights: distances must be > 0");
        w[i] = 1.0 / d;
        total += w[i];
    }
    if (total <= 0.0) throw std::runtime_error("sample_weights: all weights are zero");
    for (auto& wi : w) wi /= total;
    return w;
}

CfEngine default_cf_engine(const TrainedModel& m, const CostSpec& c, const GenOptions& opts) {
    CfEngine engine;
    engine.diverse = [&m, c, opts](std::span<const double> x, int y_cf, std::size_t k,
                                   std::uint64_t seed) {
        GenOptions o = opts;
        o.seed = seed;
        return generate_diverse(m, x, y_cf, c, k, o);
    };
    engine.boundary_cost = [&m, c, opts](std::span<const double> x, std::uint64_t seed) {
        GenOptions o = opts;
        o.seed = seed;
        return boundary_distance(m, x, c, o);
    };
    return engine;
}

namespace {

std::size_t draw_weighted(Rng& rng, std::span<const double> weights) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

} // namespace

PoisonSet generate_poison(const Dataset& train, const PredictFn& predict,
                          const TargetSpec& t, const PoisonConfig& cfg,
                          const CfEngine& engine) {
    if (cfg.n < 1 || cfg.k < 1 || cfg.alpha_steps < 1 || cfg.b < 1.0)
        throw std::invalid_argument("poison config: n,k >= 1, alpha_steps >= 1, b >= 1");

    const auto targets = build_target_set(train, predict, t);
    const auto alphas = alpha_grid(cfg.b, cfg.alpha_steps);
    const int y_cf = 1 - t.y;

    PoisonSet ps;
    ps.config = cfg;

    // Line 1: boundary distances drive the sampling weights.
    std::vector<double> weights;
    if (!cfg.uniform_sampling) {
        std::vector<double> distances(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i)
            distances[i] = engine.boundary_cost(train.features.row(targets[i]),
                                                derive_seed(cfg.seed, 0xb0, i));
        weights = sample_weights(distances);
    }

    Rng rng(derive_seed(cfg.seed, 0xd2a3));
    for (std::size_t draw = 0; draw < cfg.n; ++draw) {
        const std::size_t pick = cfg.uniform_sampling ? rng.uniform_index(targets.size())
                                                      : draw_weighted(rng, weights);
        const std::size_t row = targets[pick];
        const auto x = train.features.row(row);

        auto diverse = engine.diverse(x, y_cf, cfg.k, derive_seed(cfg.seed, 0xcf, draw));
        if (diverse.cfs.size() < cfg.k) {
            // one reseeded retry for the missing counterfactuals, never more
            const std::size_t missing = cfg.k - diverse.cfs.size();
            auto retry = engine.diverse(x, y_cf, missing,
                                        derive_seed(cfg.seed, 0xcf1e, draw));
            for (auto& cf : retry.cfs) {
                if (diverse.cfs.size() >= cfg.k) break;
                diverse.cfs.push_back(std::move(cf));
            }
        }

        for (std::size_t ci = 0; ci < cfg.k; ++ci) {
            if (ci >= diverse.cfs.size()) {
                ps.failures += alphas.size();
                continue;
            }
            const auto& cf = diverse.cfs[ci];
            for (double alpha : alphas) {
                PoisonInstance inst;
                inst.z.resize(x.size());
                for (std::size_t j = 0; j < x.size(); ++j)
                    inst.z[j] = x[j] + alpha * cf.delta[j];
                inst.y = t.y;
                inst.source_row = row;
                inst.cf_index = ci;
                inst.alpha = alpha;
                ps.instances.push_back(std::move(inst));
            }
        }
    }
    if (ps.instances.empty()) throw std::runtime_error("poison: all counterfactuals failed");
    return ps;
}

PoisonSet generate_poison(const Dataset& train, const TrainedModel& m, const TargetSpec& t,
                          const PoisonConfig& cfg, const CfEngine& engine) {
    return generate_poison(
        train, PredictFn([&m](std::span<const double> x) { return m.predict(x); }), t, cfg,
        engine);
}

LabelFlipResult label_flip_poison(const Dataset& train, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw std::invalid_argument("label flip: fraction must be in (0,1)");
    const std::size_t n = train.size();
    const auto flips =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0xf71b));
    rng.shuffle(order);
    order.resize(flips);
    std::sort(order.begin(), order.end());

    LabelFlipResult result;
    result.data = train;
    for (std::size_t i : order) result.data.labels[i] = 1 - result.data.labels[i];
    result.data.provenance += "; label_flipped(" + std::to_string(flips) + ")";
    result.flipped_indices = std::move(order);
    return result;
}

namespace {

// 1-NN signed distance difference used by the boundary oracle.
double nn_margin(const Dataset& train, std::span<const double> p) {
    double d0 = std::numeric_limits<double>::infinity();
    double d1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double d = squared_distance(train.features.row(i), p);
        if (train.labels[i] == 0)
            d0 = std::min(d0, d);
        else
            d1 = std::min(d1, d);
    }
    return std::sqrt(d0) - std::sqrt(d1);
}

} // namespace

std::vector<double> closest_boundary_point_1nn(const Dataset& train,
                                               std::span<const double> x,
                                               double grid_resolution) {
    const std::size_t d = train.dim();
    if (d > 3) throw std::invalid_argument("boundary oracle: d must be <= 3 (brute force)");
    if (!(grid_resolution > 0.0))
        throw std::invalid_argument("boundary oracle: resolution must be > 0");

    // The boundary is no farther than the nearest opposite-class sample, so a
    // box of that radius around x is guaranteed to contain the answer.
    const double sign_x = nn_margin(train, x) >= 0.0 ? 1.0 : -1.0;
    const int opposite = sign_x > 0.0 ? 0 : 1; // sign > 0 means class 1 is nearer
    double radius = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train.labels[i] == opposite)
            radius = std::min(radius, euclidean(train.features.row(i), x));
    if (std::isinf(radius)) throw std::runtime_error("boundary oracle: single-class data");
    radius += 2.0 * grid_resolution;

    std::vector<std::size_t> steps(d);
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) {
        steps[j] = static_cast<std::size_t>(2.0 * radius / grid_resolution) + 2;
        total *= steps[j];
    }

    // Sign field on the grid, then bisect only the cell edges where it flips.
    std::vector<signed char> signs(total);
    std::vector<double> p(d);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (std::size_t j = 0; j < d; ++j) {
            p[j] = x[j] - radius + grid_resolution * static_cast<double>(rem % steps[j]);
            rem /= steps[j];
        }
        signs[flat] = sign_x * nn_margin(train, p) >= 0.0 ? 1 : -1;
    }

    std::vector<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<double> a(d), b(d), q(d);
    auto unflatten = [&](std::size_t flat, std::vector<double>& out) {
        std::size_t rem = flat;
        for (std::size_t j = 0; j < d; ++j) {
            out[j] = x[j] - radius + grid_resolution * static_cast<double>(rem % steps[j]);
            rem /= steps[j];
        }
    };
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t stride = 1;
        for (std::size_t axis = 0; axis < d; ++axis) {
            const std::size_t coord = (flat / stride) % steps[axis];
            if (coord + 1 < steps[axis]) {
                const std::size_t next = flat + stride;
                if (signs[flat] != signs[next]) {
                    unflatten(flat, a);
                    unflatten(next, b);
                    // the same-side endpoint anchors the bisection
                    if (signs[flat] < 0) std::swap(a, b);
                    double t_lo = 0.0, t_hi = 1.0;
                    for (int it = 0; it < 40; ++it) {
                        const double t = 0.5 * (t_lo + t_hi);
                        for (std::size_t j = 0; j < d; ++j) q[j] = a[j] + t * (b[j] - a[j]);
                        if (sign_x * nn_margin(train, q) >= 0.0)
                            t_lo = t;
                        else
                            t_hi = t;
                    }
                    for (std::size_t j = 0; j < d; ++j)
                        q[j] = a[j] + 0.5 * (t_lo + t_hi) * (b[j] - a[j]);
                    const double dist = euclidean(q, x);
                    if (dist < best_dist) {
                        best_dist = dist;
                        best = q;
                    }
                }
            }
            stride *= steps[axis];
        }
    }
    if (best.empty()) throw std::runtime_error("boundary oracle: no sign change in range");
    return best;
}

PoisonSet svm_margin_poison(const TrainedModel& m, const Dataset& train, double xi,
                            std::size_t count, std::uint64_t seed) {
    if (m.kind() != ClassifierKind::linear_svm)
        throw std::invalid_argument("margin poison: model must be a linear svm");
    if (!(xi > 0.0) || !(xi < 1.0))
        throw std::invalid_argument("margin poison: xi must be in (0,1)");

    // Separability precondition: zero hinge violations on the training data.
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double s = train.labels[i] == 1 ? 1.0 : -1.0;
        if (s * m.decision_score(train.features.row(i)) < 1.0 - 1e-9)
            throw std::invalid_argument("margin poison: training data not separated at margin");
        if (train.labels[i] == 0) negatives.push_back(i);
    }

    const auto& lin = dynamic_cast<const detail::LinearSvmModel&>(m.impl());
    const auto& w = lin.weights();
    const double w2 = dot(w, w);
    if (!(w2 > 0.0)) throw std::invalid_argument("margin poison: degenerate zero weights");

    Rng rng(derive_seed(seed, 0x3b9));
    PoisonSet ps;
    ps.config.n = count;
    ps.config.k = 1;
    ps.config.alpha_steps = 1;
    ps.config.b = 1.0;
    ps.config.seed = seed;
    for (std::size_t i = 0; i < count; ++i) {
        // anchor at a random negative row, then slide along w so the margin
        // value -(w'z + b) falls inside [1 - xi, 1)
        const std::size_t row = negatives[rng.uniform_index(negatives.size())];
        const auto x0 = train.features.row(row);
        const double target = -(1.0 - xi) - rng.uniform() * xi * 0.999; // w'z + b in (-1, xi-1]
        const double current = m.decision_score(x0);
        PoisonInstance inst;
        inst.z.assign(x0.begin(), x0.end());
        axpy((target - current) / w2, w, inst.z);
        inst.y = 0;
        inst.source_row = row;
        inst.alpha = 1.0;
        // the slab inequality holds exactly by construction
        ps.instances.push_back(std::move(inst));
    }
    return ps;
}

PoisonVerdict verify_poisonous(
    const Dataset& train, const PoisonSet& poison, const ClassifierSpec& spec,
    std::span<const std::size_t> targets,
    const std::function<Counterfactual(const TrainedModel&, std::span<const double>, int,
                                       std::uint64_t)>& cf,
    const CostSpec& c) {
    const auto clean_model = fit(spec, train);
    const auto poisoned_model = fit(spec, poison.append_to(train));

    PoisonVerdict verdict;
    std::vector<double> deltas;
    for (std::size_t idx = 0; idx < targets.size(); ++idx) {
        const auto x = train.features.row(targets[idx]);
        const int y_cf = 1 - clean_model.predict(x);
        const std::uint64_t seed = derive_seed(spec.seed, 0x7e, idx);
        const auto cf_clean = cf(clean_model, x, y_cf, seed);
        const auto cf_poisoned = cf(poisoned_model, x, y_cf, seed);
        if (!cf_clean.valid || !cf_poisoned.valid) {
            ++verdict.failures;
            continue;
        }
        verdict.cost_clean.push_back(cost(c, cf_clean.delta));
        verdict.cost_poisoned.push_back(cost(c, cf_poisoned.delta));
        verdict.evaluated_targets.push_back(targets[idx]);
        deltas.push_back(verdict.cost_poisoned.back() - verdict.cost_clean.back());
    }
    if (!deltas.empty()) {
        verdict.mean_delta = mean_of(deltas);
        verdict.median_delta = median_of(deltas);
    }
    return verdict;
}

std::string poison_set_to_json(const PoisonSet& ps) {
    JsonWriter w(17); // full precision: replayed poison must retrain identically
    w.begin_object();
    w.key("config");
    w.begin_object();
    w.key("alpha_steps");
    w.value(ps.config.alpha_steps);
    w.key("b");
    w.value(ps.config.b);
    w.key("k");
    w.value(ps.config.k);
    w.key("n");
    w.value(ps.config.n);
    w.key("sampling");
    w.value(ps.config.uniform_sampling ? "uniform" : "boundary_weighted");
    w.key("seed");
    w.value(ps.config.seed);
    w.end_object();
    w.key("failures");
    w.value(ps.failures);
    w.key("instances");
    w.begin_array();
    for (const auto& inst : ps.instances) {
        w.begin_object();
        w.key("alpha");
        w.value(inst.alpha);
        w.key("cf_index");
        w.value(inst.cf_index);
        w.key("source_row");
        w.value(inst.source_row);
        w.key("y");
        w.value(inst.y);
        w.key("z");
        w.value(std::span<const double>(inst.z));
        w.end_object();
    }
    w.end_array();
    w.key("schema_version");
    w.value(1);
    w.end_object();
    return w.take();
}

PoisonSet poison_set_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1)
        throw std::invalid_argument("poison file: unsupported schema version");
    PoisonSet ps;
    const auto& jc = j.at("config");
    ps.config.alpha_steps = jc.at("alpha_steps").get<std::size_t>();
    ps.config.b = jc.at("b").get<double>();
    ps.config.k = jc.at("k").get<std::size_t>();
    ps.config.n = jc.at("n").get<std::size_t>();
    ps.config.uniform_sampling = jc.at("sampling").get<std::string>() == "uniform";
    ps.config.seed = jc.at("seed").get<std::uint64_t>();
    ps.failures = j.at("failures").get<std::size_t>();
    for (const auto& ji : j.at("instances")) {
        PoisonInstance inst;
        inst.alpha = ji.at("alpha").get<double>();
        inst.cf_index = ji.at("cf_index").get<std::size_t>();
        inst.source_row = ji.at("source_row").get<std::size_t>();
        inst.y = ji.at("y").get<int>();
        inst.z = ji.at("z").get<std::vector<double>>();
        ps.instances.push_back(std::move(inst));
    }
    return ps;
}

} // namespace rlab
