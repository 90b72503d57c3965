#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlab/dataset.hpp"
#include "rlab/models.hpp"

namespace rlab {

/// Cost-of-recourse definition: weighted p-norm over the change vector, plus
/// the tolerance deciding when a coordinate counts as "modified".
struct CostSpec {
    int p = 2;                     // 1 or 2
    std::vector<double> weights;   // empty -> all ones
    double sparsity_tol = 1e-6;
};

struct CfCosts {
    double l1 = 0.0;
    double l2 = 0.0;
    int sparsity = 0;
};

struct Counterfactual {
    std::vector<double> x_orig;
    std::vector<double> delta;
    int y_cf = 1;
    bool valid = false;
    CfCosts costs;
    std::string generator;
    std::size_t iterations = 0;

    std::vector<double> endpoint() const { return add(x_orig, delta); }
};

/// Search knobs shared by the generators. Defaults follow the validity-first
/// annealing recipe: C starts large and halves whenever the counterfactual
/// constraint fails, with a fixed budget of projected-gradient steps per round.
struct GenOptions {
    std::size_t budget = 200;          // gradient steps per anneal round
    std::size_t anneal_rounds = 10;
    double step = 0.05;
    double c_init = 2.0;
    double lambda_div_factor = 0.1;    // lambda_div = factor * C
    double lambda_proto_factor = 0.5;  // lambda_proto = factor * C
    std::size_t proto_neighbors = 5;
    double init_scale = 1e-3;          // random start spread for multi-CF search
    double sphere_r0 = 0.05;           // growing-spheres initial radius
    double sphere_growth = 1.3;
    std::size_t sphere_candidates = 200;
    std::size_t sphere_max_shells = 48;
    std::size_t bisect_iters = 60;
    std::uint64_t seed = 0;
};

double cost(const CostSpec& c, std::span<const double> delta);
int cost_sparsity(const CostSpec& c, std::span<const double> delta);

/// Subgradient of cost() at delta (zero at the kink).
std::vector<double> cost_gradient(const CostSpec& c, std::span<const double> delta);

CfCosts compute_costs(const CostSpec& c, std::span<const double> delta);

/// Nearest unlike neighbor: the reference row with the requested prediction
/// that minimizes cost; ties resolved toward the lowest row index. A missing
/// candidate is reported as valid == false (a generation failure).
Counterfactual generate_nun(const TrainedModel& m, const Dataset& reference,
                            std::span<const double> x, int y_cf, const CostSpec& c);

/// Closest counterfactual per the annealed gradient search; models without
/// gradients delegate to the growing-spheres random search. A valid result is
/// line-searched back toward the boundary, so the endpoint is boundary-proximal.
Counterfactual generate_gradcf(const TrainedModel& m, std::span<const double> x, int y_cf,
                               const CostSpec& c, const GenOptions& opts = {});

struct DiverseResult {
    std::vector<Counterfactual> cfs; // valid entries only
    std::size_t requested = 0;
    std::size_t failures = 0;
};

/// k diverse closest counterfactuals: joint objective with a mean-pairwise
/// distance reward for gradient models, independently seeded sphere searches
/// otherwise.
DiverseResult generate_diverse(const TrainedModel& m, std::span<const double> x, int y_cf,
                               const CostSpec& c, std::size_t k, const GenOptions& opts = {});

/// Prototype-guided counterfactual: adds a pull toward the mean of the
/// nearest reference rows predicted as y_cf. No boundary polish, so the
/// plausibility pull survives in the endpoint.
Counterfactual generate_proto(const TrainedModel& m, const Dataset& reference,
                              std::span<const double> x, int y_cf, const CostSpec& c,
                              const GenOptions& opts = {});

/// Cost of the closest counterfactual toward the opposite of predict(x);
/// +infinity when generation fails.
double boundary_distance(const TrainedModel& m, std::span<const double> x, const CostSpec& c,
                         const GenOptions& opts = {});

/// One JSON object per counterfactual (sorted keys, no trailing newline).
std::string counterfactual_to_json(const Counterfactual& cf, std::uint64_t seed);

} // namespace rlab
