#include <cmath>

#include "models_impl.hpp"

namespace rlab::detail {

// Batch subgradient descent on  J(w, b) = (1/(2C)) ||w||^2 + mean hinge,
// hinge_i = max(0, 1 - s_i (w'x_i + b)) with s_i in {-1, +1}. Deterministic:
// no sampling, decaying step, fixed iteration count. Large C approaches the
// hard-margin solution on separable data.
TrainedModel fit_linear_svm(const ClassifierSpec& spec, const Dataset& train) {
    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    const double lambda = 1.0 / spec.svm.reg_weight;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    std::vector<double> gw(d);

    for (std::size_t t = 0; t < spec.svm.epochs; ++t) {
        const double step = spec.svm.step0 / std::sqrt(1.0 + static_cast<double>(t));
        for (std::size_t j = 0; j < d; ++j) gw[j] = lambda * w[j];
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = train.labels[i] == 1 ? 1.0 : -1.0;
            const auto xi = train.features.row(i);
            if (s * (dot(w, xi) + b) < 1.0) {
                axpy(-s * inv_n, xi, gw);
                gb -= s * inv_n;
            }
        }
        axpy(-step, gw, w);
        b -= step * gb;
    }
    return TrainedModel(std::make_shared<LinearSvmModel>(std::move(w), b));
}

} // namespace rlab::detail
