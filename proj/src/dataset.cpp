#include "rlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rlab/rng.hpp"

namespace rlab {

void Dataset::validate() const {
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    for (double x : features.data)
        if (!std::isfinite(x)) throw std::invalid_argument("dataset: non-finite feature value");
    if (labels.size() != n) throw std::invalid_argument("dataset: label count != row count");
    for (int y : labels)
        if (y != 0 && y != 1) throw std::invalid_argument("dataset: label outside {0,1}");
    if (!sensitive.empty()) {
        if (sensitive.size() != n)
            throw std::invalid_argument("dataset: sensitive count != row count");
        for (int s : sensitive)
            if (s != 0 && s != 1)
                throw std::invalid_argument("dataset: sensitive value outside {0,1}");
    }
    if (feature_names.size() != d)
        throw std::invalid_argument("dataset: feature name count != dimension");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.features = features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) out.labels.push_back(labels[i]);
    if (!sensitive.empty())
        for (std::size_t i : indices) out.sensitive.push_back(sensitive[i]);
    out.feature_names = feature_names;
    out.provenance = provenance;
    return out;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - means[j]) / scales[j];
    return out;
}

std::vector<double> Standardizer::invert(std::span<const double> z) const {
    std::vector<double> out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * scales[j] + means[j];
    return out;
}

Matrix Standardizer::apply(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out.at(i, j) = (x.at(i, j) - means[j]) / scales[j];
    return out;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) out.push_back(i);
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

// Maps a two-valued column onto {0,1} (smaller value -> 0); appends the
// applied mapping to the provenance note when it was not already 0/1.
std::vector<int> binarize_column(const std::vector<double>& raw, const std::string& name,
                                 std::string& note) {
    std::set<double> distinct(raw.begin(), raw.end());
    if (distinct.size() > 2)
        throw std::invalid_argument("column '" + name + "' is not binary (" +
                                    std::to_string(distinct.size()) + " distinct values)");
    if (distinct.size() < 2)
        throw std::invalid_argument("column '" + name + "' has a single value");
    const double lo = *distinct.begin();
    const double hi = *distinct.rbegin();
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] == hi ? 1 : 0;
    if (lo != 0.0 || hi != 1.0) {
        std::ostringstream ss;
        ss << "; remapped " << name << ": {" << lo << "->0," << hi << "->1}";
        note += ss.str();
    }
    return out;
}

} // namespace

Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::optional<std::string>& sensitive_column) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open csv file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty csv file: " + path);
    const auto header = split_csv_line(line);

    std::ptrdiff_t target_idx = -1, sensitive_idx = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == target_column) target_idx = static_cast<std::ptrdiff_t>(j);
        if (sensitive_column && header[j] == *sensitive_column)
            sensitive_idx = static_cast<std::ptrdiff_t>(j);
    }
    if (target_idx < 0)
        throw std::invalid_argument("target column '" + target_column + "' not found");
    if (sensitive_column && sensitive_idx < 0)
        throw std::invalid_argument("sensitive column '" + *sensitive_column + "' not found");

    std::vector<std::string> feature_names;
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (static_cast<std::ptrdiff_t>(j) == target_idx ||
            static_cast<std::ptrdiff_t>(j) == sensitive_idx)
            continue;
        feature_names.push_back(header[j]);
        feature_cols.push_back(j);
    }

    Matrix features(0, feature_cols.size());
    std::vector<double> target_raw, sensitive_raw;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw std::invalid_argument("csv row " + std::to_string(lineno) +
                                        ": field count mismatch");
        std::vector<double> row(feature_cols.size());
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            if (!parse_number(fields[feature_cols[k]], row[k]))
                throw std::invalid_argument("column '" + feature_names[k] +
                                            "' is not numeric (row " + std::to_string(lineno) +
                                            ": '" + fields[feature_cols[k]] + "')");
        }
        features.push_row(row);
        double v = 0.0;
        if (!parse_number(fields[static_cast<std::size_t>(target_idx)], v))
            throw std::invalid_argument("target column '" + target_column +
                                        "' is not numeric (row " + std::to_string(lineno) + ")");
        target_raw.push_back(v);
        if (sensitive_idx >= 0) {
            if (!parse_number(fields[static_cast<std::size_t>(sensitive_idx)], v))
                throw std::invalid_argument("sensitive column '" + *sensitive_column +
                                            "' is not numeric (row " + std::to_string(lineno) +
                                            ")");
            sensitive_raw.push_back(v);
        }
    }
    if (features.rows == 0) throw std::invalid_argument("csv has no data rows: " + path);

    Dataset ds;
    ds.features = std::move(features);
    ds.feature_names = std::move(feature_names);
    ds.provenance = "csv:" + path;
    ds.labels = binarize_column(target_raw, target_column, ds.provenance);
    if (sensitive_idx >= 0)
        ds.sensitive = binarize_column(sensitive_raw, *sensitive_column, ds.provenance);
    ds.validate();
    return ds;
}

Dataset make_synthetic_gaussians(std::size_t n, std::size_t d, double separation,
                                 std::uint64_t seed) {
    if (n < 4 || n % 2 != 0) throw std::invalid_argument("synthetic: n must be even and >= 4");
    if (d < 1) throw std::invalid_argument("synthetic: d must be >= 1");
    if (!(separation > 0.0)) throw std::invalid_argument("synthetic: separation must be > 0");

    Rng rng(derive_seed(seed, 0x5941));
    Dataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.sensitive.resize(n);
    const double half = separation / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n / 2 ? 0 : 1;
        const double mean1 = label == 0 ? -half : half;
        for (std::size_t j = 0; j < d; ++j)
            ds.features.at(i, j) = rng.normal() + (j == 0 ? mean1 : 0.0);
        ds.labels[i] = label;
        ds.sensitive[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    ds.feature_names.resize(d);
    for (std::size_t j = 0; j < d; ++j) ds.feature_names[j] = "x" + std::to_string(j);
    std::ostringstream prov;
    prov << "synthetic_gaussians(n=" << n << ",d=" << d << ",separation=" << separation
         << ",seed=" << seed << ")";
    ds.provenance = prov.str();
    return ds;
}

Dataset undersample_majority(const Dataset& ds, std::uint64_t seed) {
    std::vector<std::size_t> zeros, ones;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (ds.labels[i] == 0 ? zeros : ones).push_back(i);
    if (zeros.empty() || ones.empty())
        throw std::invalid_argument("undersample: one class absent");
    if (zeros.size() == ones.size()) return ds;

    auto& majority = zeros.size() > ones.size() ? zeros : ones;
    const std::size_t keep = std::min(zeros.size(), ones.size());
    Rng rng(derive_seed(seed, 0xa5));
    rng.shuffle(majority);
    majority.resize(keep);

    std::vector<std::size_t> kept;
    kept.reserve(2 * keep);
    kept.insert(kept.end(), zeros.begin(), zeros.end());
    kept.insert(kept.end(), ones.begin(), ones.end());
    std::sort(kept.begin(), kept.end());
    Dataset out = ds.subset(kept);
    out.provenance += "; undersampled";
    return out;
}

std::pair<Standardizer, Dataset> standardize(const Dataset& ds,
                                             std::span<const std::size_t> fit_indices) {
    if (fit_indices.empty()) throw std::invalid_argument("standardize: empty fit set");
    const std::size_t d = ds.dim();
    Standardizer st;
    st.means.assign(d, 0.0);
    st.scales.assign(d, 1.0);
    st.constant_flags.assign(d, false);

    const double inv_n = 1.0 / static_cast<double>(fit_indices.size());
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i : fit_indices)
        for (std::size_t j = 0; j < d; ++j) {
            const double v = ds.features.at(i, j);
            st.means[j] += v * inv_n;
            lo[j] = std::min(lo[j], v);
            hi[j] = std::max(hi[j], v);
        }
    std::vector<double> var(d, 0.0);
    for (std::size_t i : fit_indices)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = ds.features.at(i, j) - st.means[j];
            var[j] += c * c * inv_n; // population variance
        }
    for (std::size_t j = 0; j < d; ++j) {
        if (lo[j] == hi[j]) { // exactly constant on the fit set
            st.means[j] = lo[j];
            st.scales[j] = 1.0;
            st.constant_flags[j] = true;
        } else {
            st.scales[j] = std::sqrt(var[j]);
        }
    }

    Dataset out = ds;
    out.features = st.apply(ds.features);
    out.provenance += "; standardized";
    return {std::move(st), std::move(out)};
}

FoldPlan kfold(const Dataset& ds, std::size_t folds, std::uint64_t seed) {
    const std::size_t n = ds.size();
    if (folds < 2) throw std::invalid_argument("kfold: folds must be >= 2");
    if (folds > n) throw std::invalid_argument("kfold: folds > n");

    FoldPlan plan;
    plan.fold_count = folds;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    Rng rng(derive_seed(seed, 0xf01d));
    std::size_t next_fold = 0; // round-robin continues across classes, so no fold stays empty
    for (int cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (ds.labels[i] == cls) idx.push_back(i);
        rng.shuffle(idx);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            plan.assignments[idx[k]] = next_fold;
            next_fold = (next_fold + 1) % folds;
        }
    }
    return plan;
}

} // namespace rlab
