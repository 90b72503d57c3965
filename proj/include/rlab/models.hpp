#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rlab/dataset.hpp"

namespace rlab {

enum class ClassifierKind { knn, linear_svm, random_forest, mlp };

std::string to_string(ClassifierKind k);
ClassifierKind classifier_kind_from_string(const std::string& s);

struct KnnParams {
    std::size_t k = 1;
};

struct SvmParams {
    double reg_weight = 1000.0; // C; hinge weight relative to the L2 penalty
    std::size_t epochs = 2000;
    double step0 = 0.5;         // decaying schedule step0 / sqrt(1 + t)
};

struct ForestParams {
    std::size_t trees = 50;
    std::size_t max_depth = 8;
    std::size_t min_leaf = 1;
    std::size_t feature_subsample = 0; // 0 -> ceil(sqrt(d))
};

struct MlpParams {
    std::vector<std::size_t> hidden = {32, 32};
    std::size_t epochs = 200;
    double step = 0.05;
    std::size_t batch = 32;
    double momentum = 0.9;
};

/// Frozen training recipe: identical spec + data always reproduce the same
/// model, which is what makes clean-vs-poisoned retraining comparable.
struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::linear_svm;
    KnnParams knn;
    SvmParams svm;
    ForestParams forest;
    MlpParams mlp;
    std::uint64_t seed = 0;
};

/// Uniform classifier interface. The decision score is a signed margin-like
/// real calibrated so 0 is the boundary; predict(x) == 1 iff score > 0.
class Model {
public:
    virtual ~Model() = default;
    virtual ClassifierKind kind() const = 0;
    virtual std::size_t dim() const = 0;
    virtual double decision_score(std::span<const double> x) const = 0;
    virtual int predict(std::span<const double> x) const {
        check_dim(x);
        return decision_score(x) > 0.0 ? 1 : 0;
    }
    virtual bool has_gradient() const { return false; }
    /// Gradient of BCE(sigmoid(decision_score(x)), y_target) w.r.t. x.
    virtual std::vector<double> loss_gradient(std::span<const double> x, int y_target) const;

protected:
    void check_dim(std::span<const double> x) const;
};

class TrainedModel {
public:
    TrainedModel() = default;
    explicit TrainedModel(std::shared_ptr<const Model> m) : impl_(std::move(m)) {}

    bool valid() const { return impl_ != nullptr; }
    ClassifierKind kind() const { return impl_->kind(); }
    std::size_t dim() const { return impl_->dim(); }
    int predict(std::span<const double> x) const { return impl_->predict(x); }
    double decision_score(std::span<const double> x) const { return impl_->decision_score(x); }
    bool has_gradient() const { return impl_->has_gradient(); }
    std::vector<double> loss_gradient(std::span<const double> x, int y_target) const {
        return impl_->loss_gradient(x, y_target);
    }
    const Model& impl() const { return *impl_; }

private:
    std::shared_ptr<const Model> impl_;
};

/// Trains a classifier; deterministic given spec.seed. Throws on single-class
/// training sets.
TrainedModel fit(const ClassifierSpec& spec, const Dataset& train);

/// Versioned JSON round-trip; predictions of a reloaded model are bit-exact.
std::string save_model(const TrainedModel& m, const ClassifierSpec& spec);
std::pair<TrainedModel, ClassifierSpec> load_model(const std::string& json_text);

inline double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace rlab
