#include "rlab/models.hpp"

#include <stdexcept>

#include "models_impl.hpp"
#include "rlab/json_io.hpp"

#include <nlohmann/json.hpp>

namespace rlab {

std::string to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::knn: return "knn";
        case ClassifierKind::linear_svm: return "linear_svm";
        case ClassifierKind::random_forest: return "random_forest";
        case ClassifierKind::mlp: return "mlp";
    }
    throw std::logic_error("unknown classifier kind");
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
    if (s == "knn") return ClassifierKind::knn;
    if (s == "linear_svm") return ClassifierKind::linear_svm;
    if (s == "random_forest") return ClassifierKind::random_forest;
    if (s == "mlp") return ClassifierKind::mlp;
    throw std::invalid_argument("unknown classifier kind: " + s);
}

void Model::check_dim(std::span<const double> x) const {
    if (x.size() != dim())
        throw std::invalid_argument("model: input dimension " + std::to_string(x.size()) +
                                    " != " + std::to_string(dim()));
}

std::vector<double> Model::loss_gradient(std::span<const double>, int) const {
    throw std::runtime_error("loss_gradient unsupported for " + to_string(kind()) +
                             "; use the gradient-free search");
}

TrainedModel fit(const ClassifierSpec& spec, const Dataset& train) {
    if (train.dim() < 1) throw std::invalid_argument("fit: empty feature space");
    bool has0 = false, has1 = false;
    for (int y : train.labels) (y == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw std::invalid_argument("fit: single-class training set");

    switch (spec.kind) {
        case ClassifierKind::knn: return detail::fit_knn(spec, train);
        case ClassifierKind::linear_svm: return detail::fit_linear_svm(spec, train);
        case ClassifierKind::random_forest: return detail::fit_random_forest(spec, train);
        case ClassifierKind::mlp: return detail::fit_mlp(spec, train);
    }
    throw std::logic_error("unknown classifier kind");
}

namespace {

constexpr int kModelSchemaVersion = 1;
constexpr int kModelFloatDigits = 17; // full double round-trip precision

void write_spec_fields(JsonWriter& w, const ClassifierSpec& spec) {
    w.key("hyperparameters");
    w.begin_object();
    switch (spec.kind) {
        case ClassifierKind::knn:
            w.key("k");
            w.value(spec.knn.k);
            break;
        case ClassifierKind::linear_svm:
            w.key("epochs");
            w.value(spec.svm.epochs);
            w.key("reg_weight");
            w.value(spec.svm.reg_weight);
            w.key("step0");
            w.value(spec.svm.step0);
            break;
        case ClassifierKind::random_forest:
            w.key("feature_subsample");
            w.value(spec.forest.feature_subsample);
            w.key("max_depth");
            w.value(spec.forest.max_depth);
            w.key("min_leaf");
            w.value(spec.forest.min_leaf);
            w.key("trees");
            w.value(spec.forest.trees);
            break;
        case ClassifierKind::mlp:
            w.key("batch");
            w.value(spec.mlp.batch);
            w.key("epochs");
            w.value(spec.mlp.epochs);
            w.key("hidden");
            w.begin_array();
            for (std::size_t h : spec.mlp.hidden) w.value(h);
            w.end_array();
            w.key("momentum");
            w.value(spec.mlp.momentum);
            w.key("step");
            w.value(spec.mlp.step);
            break;
    }
    w.end_object();
}

} // namespace

std::string save_model(const TrainedModel& m, const ClassifierSpec& spec) {
    JsonWriter w(kModelFloatDigits);
    w.begin_object();
    write_spec_fields(w, spec);
    w.key("dim");
    w.value(m.dim());
    w.key("kind");
    w.value(to_string(m.kind()));
    w.key("parameters");
    w.begin_object();
    switch (m.kind()) {
        case ClassifierKind::knn: {
            const auto& km = dynamic_cast<const detail::KnnModel&>(m.impl());
            w.key("data");
            w.value(std::span<const double>(km.data().data));
            w.key("labels");
            w.begin_array();
            for (int y : km.labels()) w.value(y);
            w.end_array();
            w.key("rows");
            w.value(km.data().rows);
            break;
        }
        case ClassifierKind::linear_svm: {
            const auto& sm = dynamic_cast<const detail::LinearSvmModel&>(m.impl());
            w.key("b");
            w.value(sm.bias());
            w.key("w");
            w.value(std::span<const double>(sm.weights()));
            break;
        }
        case ClassifierKind::random_forest: {
            const auto& fm = dynamic_cast<const detail::ForestModel&>(m.impl());
            w.key("trees");
            w.begin_array();
            for (const auto& tree : fm.trees()) {
                w.begin_array();
                for (const auto& node : tree) {
                    w.begin_array();
                    w.value(node.feature);
                    w.value(node.threshold);
                    w.value(node.left);
                    w.value(node.right);
                    w.value(node.label);
                    w.end_array();
                }
                w.end_array();
            }
            w.end_array();
            break;
        }
        case ClassifierKind::mlp: {
            const auto& nm = dynamic_cast<const detail::MlpModel&>(m.impl());
            w.key("layers");
            w.begin_array();
            for (const auto& layer : nm.layers()) {
                w.begin_object();
                w.key("b");
                w.value(std::span<const double>(layer.b));
                w.key("in");
                w.value(layer.in);
                w.key("out");
                w.value(layer.out);
                w.key("w");
                w.value(std::span<const double>(layer.w));
                w.end_object();
            }
            w.end_array();
            break;
        }
    }
    w.end_object();
    w.key("schema_version");
    w.value(kModelSchemaVersion);
    w.key("seed");
    w.value(spec.seed);
    w.end_object();
    return w.take();
}

std::pair<TrainedModel, ClassifierSpec> load_model(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
        throw std::invalid_argument("model file: unsupported schema version");

    ClassifierSpec spec;
    spec.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    spec.seed = j.at("seed").get<std::uint64_t>();
    const auto& hp = j.at("hyperparameters");
    const auto& params = j.at("parameters");
    const std::size_t dim = j.at("dim").get<std::size_t>();

    switch (spec.kind) {
        case ClassifierKind::knn: {
            spec.knn.k = hp.at("k").get<std::size_t>();
            Matrix data(params.at("rows").get<std::size_t>(), dim);
            data.data = params.at("data").get<std::vector<double>>();
            auto labels = params.at("labels").get<std::vector<int>>();
            return {TrainedModel(std::make_shared<detail::KnnModel>(std::move(data),
                                                                    std::move(labels),
                                                                    spec.knn.k)),
                    spec};
        }
        case ClassifierKind::linear_svm: {
            spec.svm.epochs = hp.at("epochs").get<std::size_t>();
            spec.svm.reg_weight = hp.at("reg_weight").get<double>();
            spec.svm.step0 = hp.at("step0").get<double>();
            auto w = params.at("w").get<std::vector<double>>();
            const double b = params.at("b").get<double>();
            return {TrainedModel(std::make_shared<detail::LinearSvmModel>(std::move(w), b)),
                    spec};
        }
        case ClassifierKind::random_forest: {
            spec.forest.feature_subsample = hp.at("feature_subsample").get<std::size_t>();
            spec.forest.max_depth = hp.at("max_depth").get<std::size_t>();
            spec.forest.min_leaf = hp.at("min_leaf").get<std::size_t>();
            spec.forest.trees = hp.at("trees").get<std::size_t>();
            std::vector<detail::Tree> trees;
            for (const auto& jt : params.at("trees")) {
                detail::Tree tree;
                for (const auto& jn : jt) {
                    detail::TreeNode node;
                    node.feature = jn.at(0).get<int>();
                    node.threshold = jn.at(1).get<double>();
                    node.left = jn.at(2).get<int>();
                    node.right = jn.at(3).get<int>();
                    node.label = jn.at(4).get<int>();
                    tree.push_back(node);
                }
                trees.push_back(std::move(tree));
            }
            return {TrainedModel(std::make_shared<detail::ForestModel>(std::move(trees), dim)),
                    spec};
        }
        case ClassifierKind::mlp: {
            spec.mlp.batch = hp.at("batch").get<std::size_t>();
            spec.mlp.epochs = hp.at("epochs").get<std::size_t>();
            spec.mlp.hidden = hp.at("hidden").get<std::vector<std::size_t>>();
            spec.mlp.momentum = hp.at("momentum").get<double>();
            spec.mlp.step = hp.at("step").get<double>();
            std::vector<detail::MlpLayer> layers;
            for (const auto& jl : params.at("layers")) {
                detail::MlpLayer layer;
                layer.in = jl.at("in").get<std::size_t>();
                layer.out = jl.at("out").get<std::size_t>();
                layer.w = jl.at("w").get<std::vector<double>>();
                layer.b = jl.at("b").get<std::vector<double>>();
                layers.push_back(std::move(layer));
            }
            return {TrainedModel(std::make_shared<detail::MlpModel>(std::move(layers), dim)),
                    spec};
        }
    }
    throw std::logic_error("unknown classifier kind");
}

} // namespace rlab
