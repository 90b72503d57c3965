#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace rlab {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    std::span<double> row(std::size_t i) {
        return {data.data() + i * cols, cols};
    }

    void push_row(std::span<const double> r) {
        if (cols == 0) cols = r.size();
        if (r.size() != cols) throw std::invalid_argument("push_row: width mismatch");
        data.insert(data.end(), r.begin(), r.end());
        ++rows;
    }

    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = at(idx[i], j);
        return out;
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

inline double norm2(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

inline double norm1(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += std::fabs(x);
    return s;
}

inline std::vector<double> add(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline std::vector<double> subtract(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline std::vector<double> scale(std::span<const double> a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
    return out;
}

/// y += c * x
inline void axpy(double c, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

/// Solve A x = b for a small symmetric positive (semi)definite system by
/// Gaussian elimination with partial pivoting. A is n x n row-major.
std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b);

/// Ordinary least squares with intercept: returns (d+1) coefficients, the last
/// one the intercept. Ridge damping `ridge` stabilizes near-singular systems.
std::vector<double> ols_fit(const Matrix& x, std::span<const double> y, double ridge = 1e-9);

/// Least-squares solution of an overdetermined m x n system via normal
/// equations; A row-major m x n, b length m.
std::vector<double> lstsq(const Matrix& a, std::span<const double> b, double ridge = 1e-12);

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (v[n / 2 - 1] + hi);
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty set");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double stddev_of(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace rlab
