#include <algorithm>
#include <limits>

#include "models_impl.hpp"

namespace rlab::detail {

double KnnModel::decision_score(std::span<const double> x) const {
    check_dim(x);
    // Signed boundary proximity: distance to nearest class-0 row minus
    // distance to nearest class-1 row; positive means class 1 is closer.
    double d0 = std::numeric_limits<double>::infinity();
    double d1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data_.rows; ++i) {
        const double d = squared_distance(data_.row(i), x);
        if (labels_[i] == 0) {
            if (d < d0) d0 = d;
        } else if (d < d1) {
            d1 = d;
        }
    }
    return std::sqrt(d0) - std::sqrt(d1);
}

int KnnModel::predict(std::span<const double> x) const {
    check_dim(x);
    if (k_ == 1) return decision_score(x) > 0.0 ? 1 : 0;

    const std::size_t k = std::min(k_, data_.rows);
    std::vector<std::pair<double, std::size_t>> dist(data_.rows);
    for (std::size_t i = 0; i < data_.rows; ++i)
        dist[i] = {squared_distance(data_.row(i), x), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::size_t votes1 = 0;
    for (std::size_t i = 0; i < k; ++i) votes1 += labels_[dist[i].second] == 1;
    if (2 * votes1 == k) return decision_score(x) > 0.0 ? 1 : 0; // tie
    return 2 * votes1 > k ? 1 : 0;
}

TrainedModel fit_knn(const ClassifierSpec& spec, const Dataset& train) {
    return TrainedModel(
        std::make_shared<KnnModel>(train.features, train.labels, spec.knn.k));
}

} // namespace rlab::detail
