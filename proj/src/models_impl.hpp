#pragma once

#include <vector>

#include "rlab/models.hpp"

namespace rlab::detail {

class KnnModel : public Model {
public:
    KnnModel(Matrix data, std::vector<int> labels, std::size_t k)
        : data_(std::move(data)), labels_(std::move(labels)), k_(k == 0 ? 1 : k) {}

    ClassifierKind kind() const override { return ClassifierKind::knn; }
    std::size_t dim() const override { return data_.cols; }
    double decision_score(std::span<const double> x) const override;
    int predict(std::span<const double> x) const override;

    const Matrix& data() const { return data_; }
    const std::vector<int>& labels() const { return labels_; }
    std::size_t k() const { return k_; }

private:
    Matrix data_;
    std::vector<int> labels_;
    std::size_t k_;
};

class LinearSvmModel : public Model {
public:
    LinearSvmModel(std::vector<double> w, double b) : w_(std::move(w)), b_(b) {}

    ClassifierKind kind() const override { return ClassifierKind::linear_svm; }
    std::size_t dim() const override { return w_.size(); }
    double decision_score(std::span<const double> x) const override {
        check_dim(x);
        return dot(w_, x) + b_;
    }
    bool has_gradient() const override { return true; }
    std::vector<double> loss_gradient(std::span<const double> x, int y_target) const override {
        const double p = sigmoid(decision_score(x));
        return rlab::scale(w_, p - static_cast<double>(y_target));
    }

    const std::vector<double>& weights() const { return w_; }
    double bias() const { return b_; }

private:
    std::vector<double> w_;
    double b_;
};

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0; // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    int label = 0;          // leaf majority label
};

using Tree = std::vector<TreeNode>;

class ForestModel : public Model {
public:
    ForestModel(std::vector<Tree> trees, std::size_t dim)
        : trees_(std::move(trees)), dim_(dim) {}

    ClassifierKind kind() const override { return ClassifierKind::random_forest; }
    std::size_t dim() const override { return dim_; }
    double decision_score(std::span<const double> x) const override;

    static int tree_predict(const Tree& t, std::span<const double> x);
    const std::vector<Tree>& trees() const { return trees_; }

private:
    std::vector<Tree> trees_;
    std::size_t dim_;
};

struct MlpLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w; // out x in, row-major
    std::vector<double> b; // out
};

class MlpModel : public Model {
public:
    MlpModel(std::vector<MlpLayer> layers, std::size_t dim)
        : layers_(std::move(layers)), dim_(dim) {}

    ClassifierKind kind() const override { return ClassifierKind::mlp; }
    std::size_t dim() const override { return dim_; }
    double decision_score(std::span<const double> x) const override; // pre-sigmoid logit
    bool has_gradient() const override { return true; }
    std::vector<double> loss_gradient(std::span<const double> x, int y_target) const override;

    const std::vector<MlpLayer>& layers() const { return layers_; }

private:
    std::vector<MlpLayer> layers_;
    std::size_t dim_;
};

TrainedModel fit_knn(const ClassifierSpec& spec, const Dataset& train);
TrainedModel fit_linear_svm(const ClassifierSpec& spec, const Dataset& train);
TrainedModel fit_random_forest(const ClassifierSpec& spec, const Dataset& train);
TrainedModel fit_mlp(const ClassifierSpec& spec, const Dataset& train);

} // namespace rlab::detail
