#include <algorithm>
#include <cmath>
#include <numeric>

#include "models_impl.hpp"
#include "rlab/rng.hpp"

namespace rlab::detail {

namespace {

// Forward pass caching post-activation values per layer; the final layer is
// linear (its output is the logit).
std::vector<std::vector<double>> forward_all(const std::vector<MlpLayer>& layers,
                                             std::span<const double> x) {
    std::vector<std::vector<double>> acts;
    acts.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        std::vector<double> out(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double s = layer.b[o];
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) s += wrow[i] * acts.back()[i];
            out[o] = (l + 1 < layers.size()) ? std::max(0.0, s) : s;
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

} // namespace

double MlpModel::decision_score(std::span<const double> x) const {
    check_dim(x);
    const auto acts = forward_all(layers_, x);
    return acts.back()[0];
}

std::vector<double> MlpModel::loss_gradient(std::span<const double> x, int y_target) const {
    check_dim(x);
    const auto acts = forward_all(layers_, x);
    const double p = sigmoid(acts.back()[0]);

    // d BCE / d logit = p - y; backpropagate to the input.
    std::vector<double> delta{p - static_cast<double>(y_target)};
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) prev[i] += wrow[i] * delta[o];
        }
        if (l > 0)
            for (std::size_t i = 0; i < layer.in; ++i)
                if (acts[l][i] <= 0.0) prev[i] = 0.0; // ReLU mask
        delta = std::move(prev);
    }
    return delta;
}

TrainedModel fit_mlp(const ClassifierSpec& spec, const Dataset& train) {
    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    Rng rng(derive_seed(spec.seed, 0x313a));

    std::vector<MlpLayer> layers;
    std::size_t in = d;
    for (std::size_t width : spec.mlp.hidden) {
        layers.push_back({in, width, {}, {}});
        in = width;
    }
    layers.push_back({in, 1, {}, {}});
    for (auto& layer : layers) {
        // He initialization
        const double sd = std::sqrt(2.0 / static_cast<double>(layer.in));
        layer.w.resize(layer.out * layer.in);
        layer.b.assign(layer.out, 0.0);
        for (auto& w : layer.w) w = rng.normal() * sd;
    }

    std::vector<MlpLayer> velocity = layers;
    for (auto& layer : velocity) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }

    const std::size_t batch = std::max<std::size_t>(1, std::min(spec.mlp.batch, n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<MlpLayer> grads = velocity;
    for (std::size_t epoch = 0; epoch < spec.mlp.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            for (auto& layer : grads) {
                std::fill(layer.w.begin(), layer.w.end(), 0.0);
                std::fill(layer.b.begin(), layer.b.end(), 0.0);
            }
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t row = order[bi];
                const auto acts = forward_all(layers, train.features.row(row));
                std::vector<double> delta{sigmoid(acts.back()[0]) -
                                          static_cast<double>(train.labels[row])};
                for (std::size_t l = layers.size(); l-- > 0;) {
                    auto& layer = layers[l];
                    auto& g = grads[l];
                    for (std::size_t o = 0; o < layer.out; ++o) {
                        g.b[o] += delta[o];
                        double* gw = g.w.data() + o * layer.in;
                        for (std::size_t i = 0; i < layer.in; ++i)
                            gw[i] += delta[o] * acts[l][i];
                    }
                    if (l == 0) break;
                    std::vector<double> prev(layer.in, 0.0);
                    for (std::size_t o = 0; o < layer.out; ++o) {
                        const double* wrow = layer.w.data() + o * layer.in;
                        for (std::size_t i = 0; i < layer.in; ++i)
                            prev[i] += wrow[i] * delta[o];
                    }
                    for (std::size_t i = 0; i < layer.in; ++i)
                        if (acts[l][i] <= 0.0) prev[i] = 0.0;
                    delta = std::move(prev);
                }
            }
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < layers.size(); ++l) {
                auto& layer = layers[l];
                auto& v = velocity[l];
                auto& g = grads[l];
                for (std::size_t k = 0; k < layer.w.size(); ++k) {
                    v.w[k] = spec.mlp.momentum * v.w[k] - spec.mlp.step * g.w[k] * inv_batch;
                    layer.w[k] += v.w[k];
                }
                for (std::size_t k = 0; k < layer.b.size(); ++k) {
                    v.b[k] = spec.mlp.momentum * v.b[k] - spec.mlp.step * g.b[k] * inv_batch;
                    layer.b[k] += v.b[k];
                }
            }
        }
    }
    return TrainedModel(std::make_shared<MlpModel>(std::move(layers), d));
}

} // namespace rlab::detail
