#include "rlab/recourse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rlab/json_io.hpp"
#include "rlab/rng.hpp"

namespace rlab {

namespace {

double weight_at(const CostSpec& c, std::size_t j) {
    return c.weights.empty() ? 1.0 : c.weights[j];
}

void check_cost_spec(const CostSpec& c, std::size_t d) {
    if (c.p != 1 && c.p != 2) throw std::invalid_argument("cost: p must be 1 or 2");
    if (!c.weights.empty()) {
        if (c.weights.size() != d) throw std::invalid_argument("cost: weight length mismatch");
        for (double w : c.weights)
            if (!(w > 0.0)) throw std::invalid_argument("cost: weights must be positive");
    }
    if (!(c.sparsity_tol > 0.0)) throw std::invalid_argument("cost: sparsity_tol must be > 0");
}

} // namespace

double cost(const CostSpec& c, std::span<const double> delta) {
    check_cost_spec(c, delta.size());
    double s = 0.0;
    if (c.p == 1) {
        for (std::size_t j = 0; j < delta.size(); ++j)
            s += weight_at(c, j) * std::fabs(delta[j]);
        return s;
    }
    for (std::size_t j = 0; j < delta.size(); ++j)
        s += weight_at(c, j) * delta[j] * delta[j];
    return std::sqrt(s);
}

int cost_sparsity(const CostSpec& c, std::span<const double> delta) {
    int n = 0;
    for (double d : delta) n += std::fabs(d) > c.sparsity_tol;
    return n;
}

std::vector<double> cost_gradient(const CostSpec& c, std::span<const double> delta) {
    std::vector<double> g(delta.size(), 0.0);
    if (c.p == 1) {
        for (std::size_t j = 0; j < delta.size(); ++j)
            g[j] = delta[j] > 0.0 ? weight_at(c, j) : (delta[j] < 0.0 ? -weight_at(c, j) : 0.0);
        return g;
    }
    const double n = cost(c, delta);
    if (n <= 0.0) return g;
    for (std::size_t j = 0; j < delta.size(); ++j) g[j] = weight_at(c, j) * delta[j] / n;
    return g;
}

CfCosts compute_costs(const CostSpec& c, std::span<const double> delta) {
    return {norm1(delta), norm2(delta), cost_sparsity(c, delta)};
}

Counterfactual generate_nun(const TrainedModel& m, const Dataset& reference,
                            std::span<const double> x, int y_cf, const CostSpec& c) {
    Counterfactual cf;
    cf.x_orig.assign(x.begin(), x.end());
    cf.y_cf = y_cf;
    cf.generator = "nun";
    cf.delta.assign(x.size(), 0.0);

    double best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t best_row = -1;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto row = reference.features.row(i);
        if (m.predict(row) != y_cf) continue;
        const double cost_i = cost(c, subtract(row, x));
        if (cost_i < best) { // strict: ties keep the lowest row index
            best = cost_i;
            best_row = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (best_row < 0) return cf; // no candidate: generation failure, valid stays false

    cf.delta = subtract(reference.features.row(static_cast<std::size_t>(best_row)), x);
    cf.valid = true;
    cf.costs = compute_costs(c, cf.delta);
    return cf;
}

namespace {

// Shrink a valid delta along its ray toward zero while the prediction holds;
// returns the valid-side endpoint of the bisection.
std::vector<double> polish_to_boundary(const TrainedModel& m, std::span<const double> x,
                                       int y_cf, std::vector<double> delta,
                                       std::size_t iters) {
    double t_lo = 0.0, t_hi = 1.0;
    std::vector<double> probe(x.size());
    for (std::size_t it = 0; it < iters; ++it) {
        const double t = 0.5 * (t_lo + t_hi);
        for (std::size_t j = 0; j < x.size(); ++j) probe[j] = x[j] + t * delta[j];
        if (m.predict(probe) == y_cf)
            t_hi = t;
        else
            t_lo = t;
    }
    for (auto& dj : delta) dj *= t_hi;
    return delta;
}

Counterfactual trivial_cf(std::span<const double> x, int y_cf, const CostSpec& c,
                          const std::string& tag) {
    Counterfactual cf;
    cf.x_orig.assign(x.begin(), x.end());
    cf.delta.assign(x.size(), 0.0);
    cf.y_cf = y_cf;
    cf.valid = true;
    cf.generator = tag;
    cf.costs = compute_costs(c, cf.delta);
    return cf;
}

Counterfactual growing_spheres(const TrainedModel& m, std::span<const double> x, int y_cf,
                               const CostSpec& c, const GenOptions& opts,
                               const std::string& tag) {
    Counterfactual cf;
    cf.x_orig.assign(x.begin(), x.end());
    cf.delta.assign(x.size(), 0.0);
    cf.y_cf = y_cf;
    cf.generator = tag;

    if (m.predict(x) == y_cf) return trivial_cf(x, y_cf, c, tag);

    Rng rng(derive_seed(opts.seed, 0x5f3a));
    const std::size_t d = x.size();
    double radius = opts.sphere_r0;
    std::vector<std::vector<double>> flips;
    for (std::size_t shell = 0; shell < opts.sphere_max_shells && flips.empty(); ++shell) {
        for (std::size_t cand = 0; cand < opts.sphere_candidates; ++cand) {
            auto dir = rng.unit_vector(d);
            std::vector<double> z(d);
            for (std::size_t j = 0; j < d; ++j) z[j] = x[j] + radius * dir[j];
            ++cf.iterations;
            if (m.predict(z) == y_cf) flips.push_back(std::move(z));
        }
        radius *= opts.sphere_growth;
    }
    if (flips.empty()) return cf; // exhausted: valid stays false

    double best = std::numeric_limits<double>::infinity();
    for (auto& z : flips) {
        auto delta = polish_to_boundary(m, x, y_cf, subtract(z, x), opts.bisect_iters);
        cf.iterations += opts.bisect_iters;
        const double cost_z = cost(c, delta);
        if (cost_z < best) {
            best = cost_z;
            cf.delta = std::move(delta);
        }
    }
    cf.valid = true;
    cf.costs = compute_costs(c, cf.delta);
    return cf;
}

} // namespace

Counterfactual generate_gradcf(const TrainedModel& m, std::span<const double> x, int y_cf,
                               const CostSpec& c, const GenOptions& opts) {
    check_cost_spec(c, x.size());
    if (!m.has_gradient()) return growing_spheres(m, x, y_cf, c, opts, "growing_spheres");

    Counterfactual cf;
    cf.x_orig.assign(x.begin(), x.end());
    cf.delta.assign(x.size(), 0.0);
    cf.y_cf = y_cf;
    cf.generator = "gradcf";

    if (m.predict(x) == y_cf) return trivial_cf(x, y_cf, c, "gradcf");

    const std::size_t d = x.size();
    double reg = opts.c_init;
    std::vector<double> delta(d, 0.0);
    std::vector<double> probe(d);
    bool valid = false;
    for (std::size_t round = 0; round < opts.anneal_rounds && !valid; ++round) {
        std::fill(delta.begin(), delta.end(), 0.0);
        for (std::size_t it = 0; it < opts.budget; ++it) {
            for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + delta[j];
            auto g = m.loss_gradient(probe, y_cf);
            const auto gc = cost_gradient(c, delta);
            for (std::size_t j = 0; j < d; ++j) delta[j] -= opts.step * (g[j] + reg * gc[j]);
            ++cf.iterations;
        }
        for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + delta[j];
        valid = m.predict(probe) == y_cf;
        if (!valid) reg *= 0.5;
    }
    if (!valid) {
        cf.delta = delta;
        cf.costs = compute_costs(c, cf.delta);
        return cf; // budget exhausted; caller decides
    }
    cf.delta = polish_to_boundary(m, x, y_cf, std::move(delta), opts.bisect_iters);
    cf.iterations += opts.bisect_iters;
    cf.valid = true;
    cf.costs = compute_costs(c, cf.delta);
    return cf;
}

DiverseResult generate_diverse(const TrainedModel& m, std::span<const double> x, int y_cf,
                               const CostSpec& c, std::size_t k, const GenOptions& opts) {
    if (k < 1) throw std::invalid_argument("generate_diverse: k must be >= 1");
    DiverseResult result;
    result.requested = k;

    if (k == 1 || !m.has_gradient()) {
        for (std::size_t i = 0; i < k; ++i) {
            GenOptions sub = opts;
            sub.seed = derive_seed(opts.seed, 0xd1, i);
            if (i == 0) sub.seed = opts.seed; // entry 0 reproduces the single-CF search
            auto cf = generate_gradcf(m, x, y_cf, c, sub);
            cf.generator = "diverse";
            if (cf.valid)
                result.cfs.push_back(std::move(cf));
            else
                ++result.failures;
        }
        return result;
    }

    const std::size_t d = x.size();
    if (m.predict(x) == y_cf) {
        for (std::size_t i = 0; i < k; ++i) result.cfs.push_back(trivial_cf(x, y_cf, c, "diverse"));
        return result;
    }

    Rng rng(derive_seed(opts.seed, 0xd1fe));
    std::vector<std::vector<double>> deltas(k, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> init(k, std::vector<double>(d, 0.0));
    for (std::size_t i = 1; i < k; ++i)
        for (std::size_t j = 0; j < d; ++j) init[i][j] = opts.init_scale * rng.normal();

    const std::size_t pairs = k * (k - 1) / 2;
    double reg = opts.c_init;
    std::vector<double> probe(d);
    std::size_t iterations = 0;
    bool all_valid = false;
    for (std::size_t round = 0; round < opts.anneal_rounds && !all_valid; ++round) {
        const double lambda_div = opts.lambda_div_factor * reg;
        deltas = init;
        for (std::size_t it = 0; it < opts.budget; ++it) {
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + deltas[i][j];
                auto g = m.loss_gradient(probe, y_cf);
                const auto gc = cost_gradient(c, deltas[i]);
                for (std::size_t j = 0; j < d; ++j) g[j] += reg * gc[j];
                if (lambda_div > 0.0 && pairs > 0) {
                    for (std::size_t o = 0; o < k; ++o) {
                        if (o == i) continue;
                        auto diff = subtract(deltas[i], deltas[o]);
                        const double dist = norm2(diff);
                        if (dist > 1e-12)
                            axpy(-lambda_div / (static_cast<double>(pairs) * dist), diff, g);
                    }
                }
                for (std::size_t j = 0; j < d; ++j) deltas[i][j] -= opts.step * g[j];
                ++iterations;
            }
        }
        all_valid = true;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + deltas[i][j];
            if (m.predict(probe) != y_cf) {
                all_valid = false;
                break;
            }
        }
        if (!all_valid) reg *= 0.5;
    }

    for (std::size_t i = 0; i < k; ++i) {
        Counterfactual cf;
        cf.x_orig.assign(x.begin(), x.end());
        cf.y_cf = y_cf;
        cf.generator = "diverse";
        cf.iterations = iterations / k + opts.bisect_iters;
        for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + deltas[i][j];
        if (m.predict(probe) != y_cf) {
            ++result.failures;
            continue;
        }
        cf.delta = polish_to_boundary(m, x, y_cf, deltas[i], opts.bisect_iters);
        cf.valid = true;
        cf.costs = compute_costs(c, cf.delta);
        result.cfs.push_back(std::move(cf));
    }
    return result;
}

Counterfactual generate_proto(const TrainedModel& m, const Dataset& reference,
                              std::span<const double> x, int y_cf, const CostSpec& c,
                              const GenOptions& opts) {
    check_cost_spec(c, x.size());
    const double lambda_factor = opts.lambda_proto_factor;
    if (lambda_factor == 0.0) {
        auto cf = generate_gradcf(m, x, y_cf, c, opts);
        cf.generator = "proto";
        return cf;
    }

    // Prototype: mean of the nearest reference rows the model predicts as y_cf.
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto row = reference.features.row(i);
        if (m.predict(row) == y_cf) candidates.push_back({squared_distance(row, x), i});
    }
    Counterfactual failed;
    failed.x_orig.assign(x.begin(), x.end());
    failed.delta.assign(x.size(), 0.0);
    failed.y_cf = y_cf;
    failed.generator = "proto";
    if (candidates.empty()) return failed; // precondition failure mirrors NUN

    const std::size_t take = std::min(opts.proto_neighbors, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end());
    std::vector<double> proto(x.size(), 0.0);
    for (std::size_t i = 0; i < take; ++i)
        axpy(1.0 / static_cast<double>(take), reference.features.row(candidates[i].second),
             proto);

    if (m.predict(x) == y_cf) return trivial_cf(x, y_cf, c, "proto");

    if (!m.has_gradient()) {
        // Sphere search ranked by the prototype-augmented objective.
        Rng rng(derive_seed(opts.seed, 0x9307));
        const std::size_t d = x.size();
        double radius = opts.sphere_r0;
        Counterfactual cf = failed;
        double best = std::numeric_limits<double>::infinity();
        bool found = false;
        for (std::size_t shell = 0; shell < opts.sphere_max_shells && !found; ++shell) {
            for (std::size_t cand = 0; cand < opts.sphere_candidates; ++cand) {
                auto dir = rng.unit_vector(d);
                std::vector<double> z(d);
                for (std::size_t j = 0; j < d; ++j) z[j] = x[j] + radius * dir[j];
                ++cf.iterations;
                if (m.predict(z) != y_cf) continue;
                const auto delta = subtract(z, x);
                const double obj = cost(c, delta) +
                                   lambda_factor * opts.c_init * squared_distance(z, proto);
                if (obj < best) {
                    best = obj;
                    cf.delta = delta;
                }
            }
            if (best < std::numeric_limits<double>::infinity()) found = true;
            radius *= opts.sphere_growth;
        }
        if (!found) return cf;
        cf.valid = true;
        cf.costs = compute_costs(c, cf.delta);
        return cf;
    }

    const std::size_t d = x.size();
    double reg = opts.c_init;
    std::vector<double> delta(d, 0.0), probe(d);
    Counterfactual cf = failed;
    bool valid = false;
    for (std::size_t round = 0; round < opts.anneal_rounds && !valid; ++round) {
        const double lambda_proto = lambda_factor * reg;
        std::fill(delta.begin(), delta.end(), 0.0);
        for (std::size_t it = 0; it < opts.budget; ++it) {
            for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + delta[j];
            auto g = m.loss_gradient(probe, y_cf);
            const auto gc = cost_gradient(c, delta);
            for (std::size_t j = 0; j < d; ++j)
                g[j] += reg * gc[j] + 2.0 * lambda_proto * (probe[j] - proto[j]);
            for (std::size_t j = 0; j < d; ++j) delta[j] -= opts.step * g[j];
            ++cf.iterations;
        }
        for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + delta[j];
        valid = m.predict(probe) == y_cf;
        if (!valid) reg *= 0.5;
    }
    cf.delta = delta;
    cf.valid = valid;
    cf.costs = compute_costs(c, cf.delta);
    return cf;
}

double boundary_distance(const TrainedModel& m, std::span<const double> x, const CostSpec& c,
                         const GenOptions& opts) {
    const int y_cf = 1 - m.predict(x);
    const auto cf = generate_gradcf(m, x, y_cf, c, opts);
    if (!cf.valid) return std::numeric_limits<double>::infinity();
    return cost(c, cf.delta);
}

std::string counterfactual_to_json(const Counterfactual& cf, std::uint64_t seed) {
    JsonWriter w;
    w.begin_object();
    w.key("costs");
    w.begin_object();
    w.key("l1");
    w.value(cf.costs.l1);
    w.key("l2");
    w.value(cf.costs.l2);
    w.key("sparsity");
    w.value(cf.costs.sparsity);
    w.end_object();
    w.key("delta");
    w.value(std::span<const double>(cf.delta));
    w.key("generator");
    w.value(cf.generator);
    w.key("iterations");
    w.value(cf.iterations);
    w.key("seed");
    w.value(seed);
    w.key("valid");
    w.value(cf.valid);
    w.key("x_orig");
    w.value(std::span<const double>(cf.x_orig));
    w.key("y_cf");
    w.value(cf.y_cf);
    w.end_object();
    return w.take();
}

} // namespace rlab
