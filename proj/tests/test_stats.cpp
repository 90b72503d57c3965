#include <doctest.h>

#include <cmath>

#include "rlab/rng.hpp"
#include "rlab/stats.hpp"

using namespace rlab;

TEST_CASE("mann-whitney exact p for total separation at n=2") {
    std::vector<double> a{1.0, 2.0}, b{3.0, 4.0};
    auto r = mann_whitney_u(a, b);
    CHECK(r.exact);
    CHECK(r.u == doctest::Approx(0.0));
    CHECK(r.p_value == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("mann-whitney identical multisets give p = 1") {
    std::vector<double> a{1.0, 2.0, 3.0}, b{1.0, 2.0, 3.0};
    auto r = mann_whitney_u(a, b);
    CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("mann-whitney strong shift is overwhelmingly significant") {
    Rng rng(1);
    std::vector<double> a(30), b(30);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() + 10.0;
    auto r = mann_whitney_u(a, b);
    CHECK(r.p_value < 0.001);
}

TEST_CASE("mann-whitney rejects empty samples") {
    std::vector<double> a{1.0}, empty;
    CHECK_THROWS_AS(mann_whitney_u(a, empty), std::invalid_argument);
    CHECK_THROWS_AS(mann_whitney_u(empty, a), std::invalid_argument);
}

TEST_CASE("mann-whitney approximation tracks exact enumeration at size 6") {
    Rng rng(2);
    double max_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(6), b(6);
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        auto exact = mann_whitney_u(a, b);
        REQUIRE(exact.exact);
        auto approx = mann_whitney_u(a, b, true);
        REQUIRE_FALSE(approx.exact);
        max_err = std::max(max_err, std::fabs(approx.p_value - exact.p_value));
    }
    CHECK(max_err <= 0.03);
}

TEST_CASE("stars consistent with cutpoints on random p values") {
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
        const double p = rng.uniform();
        const auto s = significance_stars(p);
        if (p <= 0.001)
            CHECK(s == "***");
        else if (p <= 0.01)
            CHECK(s == "**");
        else if (p <= 0.05)
            CHECK(s == "*");
        else
            CHECK(s == "ns");
    }
    CHECK(significance_stars(0.05) == "*");
    CHECK(significance_stars(0.01) == "**");
    CHECK(significance_stars(0.001) == "***");
}

TEST_CASE("f1 score formula cases") {
    std::vector<int> labels{1, 0, 1, 0};
    CHECK(f1_score(std::vector<int>{1, 0, 1, 0}, labels) == doctest::Approx(1.0));
    CHECK(f1_score(std::vector<int>{0, 1, 0, 1}, labels) == doctest::Approx(0.0));
    // TP=1, FP=1, FN=1 -> 0.5
    std::vector<int> l2{1, 1, 0};
    std::vector<int> p2{1, 0, 1};
    CHECK(f1_score(p2, l2) == doctest::Approx(0.5));
}

TEST_CASE("kde log-density closed form at a single fit point") {
    Matrix fit(1, 1);
    fit.at(0, 0) = 2.0;
    Matrix query(1, 1);
    query.at(0, 0) = 2.0;
    const double h = 0.7;
    auto ll = kde_loglik(fit, query, h);
    CHECK(ll[0] == doctest::Approx(std::log(1.0 / (h * std::sqrt(2.0 * M_PI)))));
}

TEST_CASE("kde symmetry and tail monotonicity") {
    Matrix fit(2, 1);
    fit.at(0, 0) = -1.0;
    fit.at(1, 0) = 1.0;
    Matrix query(3, 1);
    query.at(0, 0) = -1.0;
    query.at(1, 0) = 1.0;
    query.at(2, 0) = 50.0;
    auto ll = kde_loglik(fit, query, 0.5);
    CHECK(ll[0] == doctest::Approx(ll[1]));
    CHECK(ll[2] < ll[0]);
    CHECK(ll[2] < ll[1]);
}

TEST_CASE("kde matches direct sum over kernels") {
    Rng rng(4);
    Matrix fit(40, 2);
    for (std::size_t i = 0; i < 40; ++i) {
        fit.at(i, 0) = rng.normal();
        fit.at(i, 1) = rng.normal() * 2.0 + 1.0;
    }
    Matrix query(100, 2);
    for (std::size_t i = 0; i < 100; ++i) {
        query.at(i, 0) = rng.uniform(-3.0, 3.0);
        query.at(i, 1) = rng.uniform(-5.0, 7.0);
    }
    const double h = 0.8;
    auto ll = kde_loglik(fit, query, h);
    for (std::size_t q = 0; q < query.rows; ++q) {
        double direct = 0.0;
        for (std::size_t i = 0; i < fit.rows; ++i) {
            double e = 0.0;
            for (std::size_t j = 0; j < 2; ++j) {
                const double z = (query.at(q, j) - fit.at(i, j)) / h;
                e += z * z;
            }
            direct += std::exp(-0.5 * e) / (2.0 * M_PI * h * h);
        }
        direct /= 40.0;
        CHECK(std::fabs(std::log(direct) - ll[q]) < 1e-10);
    }
    Matrix empty(0, 2);
    CHECK_THROWS_AS(kde_loglik(empty, query), std::invalid_argument);
}
