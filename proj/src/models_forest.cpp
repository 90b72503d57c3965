#include <algorithm>
#include <cmath>
#include <numeric>

#include "models_impl.hpp"
#include "rlab/rng.hpp"

namespace rlab::detail {

namespace {

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    std::size_t max_depth;
    std::size_t min_leaf;
    std::size_t mtry;
    Rng& rng;
    Tree nodes;

    int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
              std::size_t depth) {
        const std::size_t count = hi - lo;
        std::size_t ones = 0;
        for (std::size_t i = lo; i < hi; ++i) ones += y[idx[i]] == 1;

        const bool pure = ones == 0 || ones == count;
        if (pure || depth >= max_depth || count < 2 * min_leaf)
            return make_leaf(ones, count);

        // Sample mtry candidate features without replacement.
        std::vector<std::size_t> features(x.cols);
        std::iota(features.begin(), features.end(), 0);
        for (std::size_t i = 0; i < mtry && i + 1 < features.size(); ++i) {
            std::size_t j = i + rng.uniform_index(features.size() - i);
            std::swap(features[i], features[j]);
        }
        features.resize(std::min(mtry, features.size()));

        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        const double parent_gini = gini(ones, count);

        std::vector<std::pair<double, int>> vals(count);
        for (std::size_t f : features) {
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t r = idx[lo + i];
                vals[i] = {x.at(r, f), y[r]};
            }
            std::sort(vals.begin(), vals.end());
            std::size_t left_ones = 0;
            for (std::size_t i = 0; i + 1 < count; ++i) {
                left_ones += vals[i].second == 1;
                if (vals[i].first == vals[i + 1].first) continue;
                const std::size_t nl = i + 1, nr = count - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double child =
                    (static_cast<double>(nl) * gini(left_ones, nl) +
                     static_cast<double>(nr) * gini(ones - left_ones, nr)) /
                    static_cast<double>(count);
                const double gain = parent_gini - child;
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return make_leaf(ones, count);

        const auto mid = std::partition(idx.begin() + lo, idx.begin() + hi,
                                        [&](std::size_t r) {
                                            return x.at(r, best_feature) <= best_threshold;
                                        });
        const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
        if (split == lo || split == hi) return make_leaf(ones, count);

        const int node_id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[node_id].feature = best_feature;
        nodes[node_id].threshold = best_threshold;
        const int left = build(idx, lo, split, depth + 1);
        const int right = build(idx, split, hi, depth + 1);
        nodes[node_id].left = left;
        nodes[node_id].right = right;
        return node_id;
    }

    int make_leaf(std::size_t ones, std::size_t count) {
        TreeNode leaf;
        leaf.label = 2 * ones > count ? 1 : 0;
        nodes.push_back(leaf);
        return static_cast<int>(nodes.size() - 1);
    }

    static double gini(std::size_t ones, std::size_t count) {
        const double p = static_cast<double>(ones) / static_cast<double>(count);
        return 2.0 * p * (1.0 - p);
    }
};

} // namespace

int ForestModel::tree_predict(const Tree& t, std::span<const double> x) {
    int node = 0;
    while (t[node].feature >= 0)
        node = x[t[node].feature] <= t[node].threshold ? t[node].left : t[node].right;
    return t[node].label;
}

double ForestModel::decision_score(std::span<const double> x) const {
    check_dim(x);
    std::size_t votes1 = 0;
    for (const auto& t : trees_) votes1 += tree_predict(t, x) == 1;
    return static_cast<double>(votes1) / static_cast<double>(trees_.size()) - 0.5;
}

TrainedModel fit_random_forest(const ClassifierSpec& spec, const Dataset& train) {
    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    const std::size_t mtry =
        spec.forest.feature_subsample > 0
            ? spec.forest.feature_subsample
            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

    std::vector<Tree> trees;
    trees.reserve(spec.forest.trees);
    for (std::size_t t = 0; t < spec.forest.trees; ++t) {
        Rng rng(derive_seed(spec.seed, 0xf0e57, t));
        std::vector<std::size_t> bootstrap(n);
        for (auto& i : bootstrap) i = rng.uniform_index(n);
        TreeBuilder builder{train.features, train.labels, spec.forest.max_depth,
                            spec.forest.min_leaf, mtry, rng, {}};
        // Root must end at node 0; build() appends internal nodes pre-order.
        builder.build(bootstrap, 0, n, 0);
        trees.push_back(std::move(builder.nodes));
    }
    return TrainedModel(std::make_shared<ForestModel>(std::move(trees), d));
}

} // namespace rlab::detail
