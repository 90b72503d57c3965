#include "rlab/linalg.hpp"

namespace rlab {

std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    if (a.size() != n * n) throw std::invalid_argument("solve_linear_system: shape mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
        if (std::fabs(a[pivot * n + col]) < 1e-300)
            throw std::runtime_error("solve_linear_system: singular matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[pivot * n + j], a[col * n + j]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t j = ri + 1; j < n; ++j) s -= a[ri * n + j] * x[j];
        x[ri] = s / a[ri * n + ri];
    }
    return x;
}

std::vector<double> ols_fit(const Matrix& x, std::span<const double> y, double ridge) {
    const std::size_t n = x.rows;
    const std::size_t d = x.cols;
    const std::size_t p = d + 1; // + intercept
    std::vector<double> xtx(p * p, 0.0);
    std::vector<double> xty(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = x.row(i);
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) xtx[a * p + b] += r[a] * r[b];
            xtx[a * p + d] += r[a];
            xtx[d * p + a] += r[a];
            xty[a] += r[a] * y[i];
        }
        xtx[d * p + d] += 1.0;
        xty[d] += y[i];
    }
    for (std::size_t a = 0; a < p; ++a) xtx[a * p + a] += ridge;
    return solve_linear_system(std::move(xtx), std::move(xty));
}

std::vector<double> lstsq(const Matrix& a, std::span<const double> b, double ridge) {
    const std::size_t m = a.rows;
    const std::size_t n = a.cols;
    std::vector<double> ata(n * n, 0.0);
    std::vector<double> atb(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        auto r = a.row(i);
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = 0; q < n; ++q) ata[p * n + q] += r[p] * r[q];
            atb[p] += r[p] * b[i];
        }
    }
    for (std::size_t p = 0; p < n; ++p) ata[p * n + p] += ridge;
    return solve_linear_system(std::move(ata), std::move(atb));
}

} // namespace rlab
