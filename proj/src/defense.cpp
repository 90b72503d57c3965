#include "rlab/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rlab/json_io.hpp"
#include "rlab/rng.hpp"

namespace rlab {

std::string to_string(DefenseMethod m) {
    switch (m) {
        case DefenseMethod::iforest: return "iforest";
        case DefenseMethod::lof: return "lof";
        case DefenseMethod::knn_defense: return "knn_defense";
        case DefenseMethod::l2_defense: return "l2_defense";
        case DefenseMethod::slab_defense: return "slab_defense";
    }
    throw std::logic_error("unknown defense method");
}

DefenseMethod defense_method_from_string(const std::string& s) {
    if (s == "iforest") return DefenseMethod::iforest;
    if (s == "lof") return DefenseMethod::lof;
    if (s == "knn_defense") return DefenseMethod::knn_defense;
    if (s == "l2_defense") return DefenseMethod::l2_defense;
    if (s == "slab_defense") return DefenseMethod::slab_defense;
    throw std::invalid_argument("unknown defense method: " + s);
}

// ---------------------------------------------------------------------------
// Isolation forest

namespace {

struct IsoNode {
    int feature = -1; // -1 leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t size = 0;
};

double harmonic(double x) { return std::log(x) + 0.5772156649015329; }

// Average unsuccessful-search path length in a BST of n nodes.
double c_factor(std::size_t n) {
    if (n <= 1) return 0.0;
    const double nd = static_cast<double>(n);
    return 2.0 * harmonic(nd - 1.0) - 2.0 * (nd - 1.0) / nd;
}

struct IsoTreeBuilder {
    const Matrix& data;
    std::size_t depth_limit;
    Rng& rng;
    std::vector<IsoNode> nodes;

    int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
              std::size_t depth) {
        const std::size_t count = hi - lo;
        if (depth >= depth_limit || count <= 1) return make_leaf(count);

        // pick a feature with spread; give up after a bounded number of tries
        int feature = -1;
        double fmin = 0.0, fmax = 0.0;
        for (int attempt = 0; attempt < 8 && feature < 0; ++attempt) {
            const auto f = rng.uniform_index(data.cols);
            fmin = std::numeric_limits<double>::infinity();
            fmax = -fmin;
            for (std::size_t i = lo; i < hi; ++i) {
                const double v = data.at(idx[i], f);
                fmin = std::min(fmin, v);
                fmax = std::max(fmax, v);
            }
            if (fmax > fmin) feature = static_cast<int>(f);
        }
        if (feature < 0) return make_leaf(count); // duplicated rows

        const double split = rng.uniform(fmin, fmax);
        const auto mid =
            std::partition(idx.begin() + lo, idx.begin() + hi,
                           [&](std::size_t r) { return data.at(r, feature) < split; });
        const std::size_t cut = static_cast<std::size_t>(mid - idx.begin());
        if (cut == lo || cut == hi) return make_leaf(count);

        const int node_id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[node_id].feature = feature;
        nodes[node_id].split = split;
        nodes[node_id].size = count;
        const int left = build(idx, lo, cut, depth + 1);
        const int right = build(idx, cut, hi, depth + 1);
        nodes[node_id].left = left;
        nodes[node_id].right = right;
        return node_id;
    }

    int make_leaf(std::size_t count) {
        IsoNode leaf;
        leaf.size = count;
        nodes.push_back(leaf);
        return static_cast<int>(nodes.size() - 1);
    }
};

double iso_path_length(const std::vector<IsoNode>& nodes, std::span<const double> x) {
    int node = 0;
    double depth = 0.0;
    while (nodes[node].feature >= 0) {
        node = x[nodes[node].feature] < nodes[node].split ? nodes[node].left
                                                          : nodes[node].right;
        depth += 1.0;
    }
    return depth + c_factor(nodes[node].size);
}

} // namespace

std::vector<double> iforest_scores(const Matrix& data, const DefenseSpec& spec) {
    if (data.rows < 2) throw std::invalid_argument("iforest: need at least 2 rows");
    const std::size_t psi = std::min<std::size_t>(spec.iforest_subsample, data.rows);
    const auto depth_limit =
        static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(psi)))) + 1;

    std::vector<std::vector<IsoNode>> forest;
    forest.reserve(spec.iforest_trees);
    for (std::size_t t = 0; t < spec.iforest_trees; ++t) {
        Rng rng(derive_seed(spec.seed, 0x150, t));
        // subsample without replacement (partial Fisher-Yates)
        std::vector<std::size_t> idx(data.rows);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < psi; ++i) {
            const std::size_t j = i + rng.uniform_index(data.rows - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(psi);
        IsoTreeBuilder builder{data, depth_limit, rng, {}};
        builder.build(idx, 0, psi, 0);
        forest.push_back(std::move(builder.nodes));
    }

    const double norm = c_factor(psi);
    std::vector<double> scores(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
        double mean_path = 0.0;
        for (const auto& tree : forest) mean_path += iso_path_length(tree, data.row(i));
        mean_path /= static_cast<double>(forest.size());
        scores[i] = std::pow(2.0, -mean_path / norm);
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Local outlier factor

std::vector<double> lof_scores(const Matrix& data, const DefenseSpec& spec) {
    const std::size_t n = data.rows;
    const std::size_t k = spec.lof_k;
    if (k < 1) throw std::invalid_argument("lof: k must be >= 1");
    if (k >= n - 1 || n < 3)
        throw std::invalid_argument("lof: too few rows for k=" + std::to_string(k));

    // k nearest neighbors per row (excluding self), ties by index
    std::vector<std::vector<std::size_t>> neighbors(n);
    std::vector<std::vector<double>> ndist(n);
    std::vector<double> kdist(n);
    std::vector<std::pair<double, std::size_t>> buf(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            buf[m++] = {euclidean(data.row(i), data.row(j)), j};
        }
        std::partial_sort(buf.begin(), buf.begin() + k, buf.end());
        neighbors[i].resize(k);
        ndist[i].resize(k);
        for (std::size_t t = 0; t < k; ++t) {
            ndist[i][t] = buf[t].first;
            neighbors[i][t] = buf[t].second;
        }
        kdist[i] = ndist[i][k - 1];
    }

    // local reachability density
    std::vector<double> lrd(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            const std::size_t j = neighbors[i][t];
            sum += std::max(kdist[j], ndist[i][t]); // reachability distance
        }
        lrd[i] = sum > 0.0 ? static_cast<double>(k) / sum
                           : std::numeric_limits<double>::infinity();
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isinf(lrd[i])) { // duplicate cluster: perfectly dense
            out[i] = 1.0;
            continue;
        }
        double sum = 0.0;
        for (std::size_t j : neighbors[i])
            sum += std::isinf(lrd[j]) ? 1e12 : lrd[j] / lrd[i];
        out[i] = sum / static_cast<double>(k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Threshold defenses

std::vector<double> knn_defense_scores(const Matrix& data, std::span<const int> labels,
                                       const DefenseSpec& spec) {
    const std::size_t n = data.rows;
    if (labels.size() != n) throw std::invalid_argument("knn defense: label mismatch");
    std::vector<double> scores(n, 0.0);
    std::vector<double> dists;
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (!spec.knn_cross_class && labels[j] != labels[i]) continue;
            dists.push_back(euclidean(data.row(i), data.row(j)));
        }
        if (dists.empty()) { // no same-class peer: maximally anomalous, JSON-safe
            scores[i] = std::numeric_limits<double>::max();
            continue;
        }
        const std::size_t rank = std::min(spec.k, dists.size()) - 1;
        std::nth_element(dists.begin(), dists.begin() + rank, dists.end());
        scores[i] = dists[rank];
    }
    return scores;
}

std::vector<bool> knn_defense(const Matrix& data, std::span<const int> labels, std::size_t k,
                              double threshold) {
    DefenseSpec spec;
    spec.k = k;
    const auto scores = knn_defense_scores(data, labels, spec);
    std::vector<bool> flags(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        flags[i] = scores[i] >= threshold && scores[i] > 0.0;
    return flags;
}

namespace {

std::pair<std::vector<double>, std::vector<double>> class_centroids(
    const Matrix& data, std::span<const int> labels) {
    std::vector<double> mu0(data.cols, 0.0), mu1(data.cols, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        auto& mu = labels[i] == 0 ? mu0 : mu1;
        (labels[i] == 0 ? n0 : n1)++;
        axpy(1.0, data.row(i), mu);
    }
    if (n0 == 0 || n1 == 0)
        throw std::invalid_argument("centroid defense: both classes required");
    for (auto& v : mu0) v /= static_cast<double>(n0);
    for (auto& v : mu1) v /= static_cast<double>(n1);
    return {std::move(mu0), std::move(mu1)};
}

} // namespace

std::vector<double> l2_defense_scores(const Matrix& data, std::span<const int> labels) {
    const auto [mu0, mu1] = class_centroids(data, labels);
    std::vector<double> scores(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i)
        scores[i] = euclidean(data.row(i), labels[i] == 0 ? mu0 : mu1);
    return scores;
}

std::vector<bool> l2_defense(const Matrix& data, std::span<const int> labels,
                             double threshold) {
    const auto scores = l2_defense_scores(data, labels);
    std::vector<bool> flags(scores.size());
    // a zero statistic means "exactly at the centroid": never anomalous
    for (std::size_t i = 0; i < scores.size(); ++i)
        flags[i] = scores[i] >= threshold && scores[i] > 0.0;
    return flags;
}

std::vector<double> slab_defense_scores(const Matrix& data, std::span<const int> labels) {
    const auto [mu0, mu1] = class_centroids(data, labels);
    const auto axis = subtract(mu0, mu1);
    std::vector<double> scores(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
        const auto centered = subtract(data.row(i), labels[i] == 0 ? mu0 : mu1);
        scores[i] = std::fabs(dot(axis, centered));
    }
    return scores;
}

std::vector<bool> slab_defense(const Matrix& data, std::span<const int> labels,
                               double threshold) {
    const auto scores = slab_defense_scores(data, labels);
    std::vector<bool> flags(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        flags[i] = scores[i] >= threshold && scores[i] > 0.0;
    return flags;
}

double calibrate_threshold(std::span<const double> scores_on_clean, double fpr) {
    if (scores_on_clean.empty())
        throw std::invalid_argument("calibrate_threshold: empty clean scores");
    if (!(fpr > 0.0) || !(fpr < 1.0))
        throw std::invalid_argument("calibrate_threshold: fpr must be in (0,1)");
    std::vector<double> sorted(scores_on_clean.begin(), scores_on_clean.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto flagged = static_cast<std::size_t>(
        std::floor(fpr * static_cast<double>(sorted.size())));
    if (flagged == 0)
        return std::nextafter(sorted.front(), std::numeric_limits<double>::infinity());
    return sorted[flagged - 1];
}

DetectionReport evaluate_detection(const std::vector<bool>& flags,
                                   const std::vector<double>& scores, double threshold,
                                   const std::vector<std::size_t>& poison_indices,
                                   const std::string& method) {
    DetectionReport report;
    report.method = method;
    report.flags = flags;
    report.scores = scores;
    report.threshold = threshold;
    report.poison_indices = poison_indices;

    std::vector<bool> is_poison(flags.size(), false);
    for (std::size_t i : poison_indices) is_poison[i] = true;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] && is_poison[i]) ++tp;
        if (flags[i] && !is_poison[i]) ++fp;
        if (!flags[i] && is_poison[i]) ++fn;
    }
    report.recall = poison_indices.empty()
                        ? 0.0
                        : static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tp + fp == 0) {
        report.precision = 0.0;
        report.precision_defined = false;
    } else {
        report.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    return report;
}

DetectionReport run_defense(const Matrix& combined, std::span<const int> combined_labels,
                            const Matrix& holdout, std::span<const int> holdout_labels,
                            const std::vector<std::size_t>& poison_indices,
                            const DefenseSpec& spec) {
    std::vector<double> scores, clean_scores;
    switch (spec.method) {
        case DefenseMethod::iforest: {
            // hold-out rows are scored by the same forest: append and rescore
            Matrix all = combined;
            for (std::size_t i = 0; i < holdout.rows; ++i) all.push_row(holdout.row(i));
            const auto all_scores = iforest_scores(all, spec);
            scores.assign(all_scores.begin(),
                          all_scores.begin() + static_cast<std::ptrdiff_t>(combined.rows));
            clean_scores.assign(
                all_scores.begin() + static_cast<std::ptrdiff_t>(combined.rows),
                all_scores.end());
            break;
        }
        case DefenseMethod::lof: {
            scores = lof_scores(combined, spec);
            clean_scores = lof_scores(holdout, spec);
            break;
        }
        case DefenseMethod::knn_defense: {
            scores = knn_defense_scores(combined, combined_labels, spec);
            clean_scores = knn_defense_scores(holdout, holdout_labels, spec);
            break;
        }
        case DefenseMethod::l2_defense: {
            scores = l2_defense_scores(combined, combined_labels);
            clean_scores = l2_defense_scores(holdout, holdout_labels);
            break;
        }
        case DefenseMethod::slab_defense: {
            scores = slab_defense_scores(combined, combined_labels);
            clean_scores = slab_defense_scores(holdout, holdout_labels);
            break;
        }
    }
    const double threshold = calibrate_threshold(clean_scores, spec.calibration_fpr);
    std::vector<bool> flags(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        flags[i] = scores[i] >= threshold && scores[i] > 0.0;
    return evaluate_detection(flags, scores, threshold, poison_indices,
                              to_string(spec.method));
}

std::string detection_report_to_json(const DetectionReport& report) {
    JsonWriter w;
    w.begin_object();
    w.key("flags");
    w.begin_array();
    for (bool f : report.flags) w.value(f);
    w.end_array();
    w.key("method");
    w.value(report.method);
    w.key("poison_indices");
    w.value(report.poison_indices);
    w.key("precision");
    w.value(report.precision);
    w.key("precision_defined");
    w.value(report.precision_defined);
    w.key("recall");
    w.value(report.recall);
    w.key("schema_version");
    w.value(1);
    w.key("scores");
    w.value(std::span<const double>(report.scores));
    w.key("threshold");
    w.value(report.threshold);
    w.end_object();
    return w.take();
}

} // namespace rlab
