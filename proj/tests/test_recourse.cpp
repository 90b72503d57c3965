#include <doctest.h>

#include <cmath>

#include "models_impl.hpp"
#include "rlab/dataset.hpp"
#include "rlab/recourse.hpp"
#include "rlab/rng.hpp"

using namespace rlab;

namespace {

TrainedModel linear_model(std::vector<double> w, double b) {
    return TrainedModel(std::make_shared<rlab::detail::LinearSvmModel>(std::move(w), b));
}

Dataset dataset_1d(std::vector<double> xs, std::vector<int> ys) {
    Dataset ds;
    ds.features = Matrix(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) ds.features.at(i, 0) = xs[i];
    ds.labels = std::move(ys);
    ds.feature_names = {"x0"};
    return ds;
}

} // namespace

TEST_CASE("p-norm cost values") {
    CostSpec c1{1, {}, 1e-6};
    CHECK(cost(c1, std::vector<double>{1.0, -2.0, 0.0}) == doctest::Approx(3.0));
    CostSpec c2{2, {}, 1e-6};
    CHECK(cost(c2, std::vector<double>{3.0, 4.0}) == doctest::Approx(5.0));
    CostSpec cw{1, {2.0, 1.0}, 1e-6};
    CHECK(cost(cw, std::vector<double>{1.0, 1.0}) == doctest::Approx(3.0));
    CHECK_THROWS_AS(cost(cw, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("sparsity cost counts modified features") {
    CostSpec c{2, {}, 1e-6};
    CHECK(cost_sparsity(c, std::vector<double>{0.0, 0.0}) == 0);
    CHECK(cost_sparsity(c, std::vector<double>{0.0, 1e-12, 0.5}) == 1);
    CHECK(cost_sparsity(c, std::vector<double>{0.1, -0.2, 0.3}) == 3);
}

TEST_CASE("nun picks closest candidate and breaks ties by row index") {
    auto ref = dataset_1d({2.0, 5.0, -3.0}, {1, 1, 0});
    auto m = linear_model({1.0}, 0.0); // predicts 1 for positive x
    CostSpec c{2, {}, 1e-6};
    auto cf = generate_nun(m, ref, std::vector<double>{0.0}, 1, c);
    CHECK(cf.valid);
    CHECK(cf.delta[0] == doctest::Approx(2.0));

    // identity case: x itself present and already predicted y_cf
    auto cf2 = generate_nun(m, ref, std::vector<double>{2.0}, 1, c);
    CHECK(cf2.valid);
    CHECK(cf2.delta[0] == doctest::Approx(0.0));

    // tie: candidates at equal cost, lower row index wins
    auto ref_tie = dataset_1d({2.0, -2.0, -5.0}, {1, 1, 0});
    auto m_abs = linear_model({0.0}, 1.0); // constant positive: everything predicted 1
    auto cf3 = generate_nun(m_abs, ref_tie, std::vector<double>{0.0}, 1, c);
    CHECK(cf3.valid);
    CHECK(cf3.delta[0] == doctest::Approx(2.0)); // row 0, not row 1

    // no candidate at all -> generation failure
    auto m_neg = linear_model({0.0}, -1.0); // everything predicted 0
    auto cf4 = generate_nun(m_neg, ref, std::vector<double>{0.0}, 1, c);
    CHECK_FALSE(cf4.valid);
}

TEST_CASE("nun equals exhaustive scan always") {
    Rng rng(71);
    CostSpec c{1, {}, 1e-6};
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(30);
        Dataset ref;
        ref.features = Matrix(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            ref.features.at(i, 0) = rng.uniform(-3.0, 3.0);
            ref.features.at(i, 1) = rng.uniform(-3.0, 3.0);
            ref.labels.push_back(rng.uniform() < 0.5 ? 0 : 1);
        }
        ref.feature_names = {"a", "b"};
        auto m = linear_model({rng.normal(), rng.normal()}, rng.normal());
        std::vector<double> x{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        auto cf = generate_nun(m, ref, x, 1, c);

        double best = std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (m.predict(ref.features.row(i)) != 1) continue;
            any = true;
            best = std::min(best, cost(c, subtract(ref.features.row(i), x)));
        }
        CHECK(cf.valid == any);
        if (any) CHECK(cost(c, cf.delta) == doctest::Approx(best));
    }
}

TEST_CASE("gradcf reaches the closed-form distance on a linear model") {
    auto m = linear_model({1.0}, 0.0);
    CostSpec c{2, {}, 1e-6};
    auto cf = generate_gradcf(m, std::vector<double>{-2.0}, 1, c);
    CHECK(cf.valid);
    CHECK(cf.delta[0] == doctest::Approx(2.0).epsilon(0.025)); // |eps| <= 0.05
    CHECK(m.predict(cf.endpoint()) == 1);

    // already on requested side -> zero delta
    auto cf2 = generate_gradcf(m, std::vector<double>{0.5}, 1, c);
    CHECK(cf2.valid);
    CHECK(cf2.delta[0] == 0.0);
}

TEST_CASE("gradcf delegate on 1-nn lands near the midpoint boundary") {
    auto train = dataset_1d({0.0, 2.0}, {0, 1});
    ClassifierSpec spec;
    spec.kind = ClassifierKind::knn;
    auto m = fit(spec, train);
    CostSpec c{2, {}, 1e-6};
    GenOptions opts;
    opts.seed = 9;
    auto cf = generate_gradcf(m, std::vector<double>{0.0}, 1, c, opts);
    CHECK(cf.valid);
    CHECK(cf.generator == "growing_spheres");
    // brute-force grid: boundary at 1.0; cost within 5%
    CHECK(cost(c, cf.delta) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("gradcf minimality within 5% of point-to-hyperplane distance") {
    Rng rng(17);
    CostSpec c{2, {}, 1e-6};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> w{rng.normal(), rng.normal(), rng.normal()};
        const double target_norm = rng.uniform(0.7, 2.5);
        const double rescale = target_norm / norm2(w);
        for (auto& wj : w) wj *= rescale;
        const double b = rng.uniform(-1.0, 1.0) * target_norm;
        auto m = linear_model(w, b);
        std::vector<double> x{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                              rng.uniform(-3.0, 3.0)};
        const int y_cf = 1 - m.predict(x);
        GenOptions opts;
        opts.seed = static_cast<std::uint64_t>(trial);
        auto cf = generate_gradcf(m, x, y_cf, c, opts);
        REQUIRE(cf.valid);
        const double exact = std::fabs(dot(w, x) + b) / norm2(w);
        CHECK(cost(c, cf.delta) <= 1.05 * exact + 1e-9);
        CHECK(cost(c, cf.delta) >= exact - 1e-9);
    }
}

TEST_CASE("gradcf validity is sound when re-checked") {
    auto ds = make_synthetic_gaussians(100, 3, 2.0, 5);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::mlp;
    spec.mlp.epochs = 60;
    spec.seed = 5;
    auto m = fit(spec, ds);
    CostSpec c{2, {}, 1e-6};
    Rng rng(6);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
        const int y_cf = 1 - m.predict(x);
        GenOptions opts;
        opts.seed = static_cast<std::uint64_t>(t);
        auto cf = generate_gradcf(m, x, y_cf, c, opts);
        if (cf.valid) CHECK(m.predict(cf.endpoint()) == y_cf);
        // cost record recomputable
        CHECK(cf.costs.l1 == doctest::Approx(norm1(cf.delta)).epsilon(1e-12));
    }
}

TEST_CASE("gradcf cost non-increasing in iteration budget") {
    auto ds = make_synthetic_gaussians(200, 4, 4.0, 29);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 29;
    auto m = fit(spec, ds);
    CostSpec c{2, {}, 1e-6};
    Rng rng(30);
    for (int t = 0; t < 10; ++t) {
        // boundary-proximal originals: the regime the poisoning pipeline sees
        std::vector<double> x{rng.uniform(-1.5, -0.2), 0.5 * rng.normal(),
                              0.5 * rng.normal(), 0.5 * rng.normal()};
        const int y_cf = 1 - m.predict(x);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t budget : {50u, 200u, 800u}) {
            GenOptions opts;
            opts.budget = budget;
            opts.seed = static_cast<std::uint64_t>(t);
            auto cf = generate_gradcf(m, x, y_cf, c, opts);
            REQUIRE(cf.valid);
            const double cur = cost(c, cf.delta);
            CHECK(cur <= prev + 1e-9);
            prev = cur;
        }
    }
}

TEST_CASE("diverse k=1 coincides with gradcf") {
    auto m = linear_model({1.0, 0.5}, -0.2);
    CostSpec c{2, {}, 1e-6};
    std::vector<double> x{-1.5, 0.3};
    GenOptions opts;
    opts.seed = 21;
    auto single = generate_gradcf(m, x, 1, c, opts);
    auto div = generate_diverse(m, x, 1, c, 1, opts);
    REQUIRE(div.cfs.size() == 1);
    CHECK(std::fabs(cost(c, div.cfs[0].delta) - cost(c, single.delta)) < 1e-6);
}

TEST_CASE("diverse k=3 on a 2-d linear model separates endpoints") {
    auto m = linear_model({1.0, 1.0}, 0.0);
    CostSpec c{2, {}, 1e-6};
    std::vector<double> x{-2.0, -1.0};
    GenOptions opts;
    opts.seed = 33;
    auto div = generate_diverse(m, x, 1, c, 3, opts);
    REQUIRE(div.cfs.size() == 3);
    double min_pair = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(m.predict(div.cfs[i].endpoint()) == 1);
        for (std::size_t j = i + 1; j < 3; ++j)
            min_pair = std::min(min_pair,
                                euclidean(div.cfs[i].endpoint(), div.cfs[j].endpoint()));
    }
    CHECK(min_pair > 0.0);
}

TEST_CASE("diverse with zero diversity penalty degenerates to the single solution") {
    auto m = linear_model({1.0, -0.7}, 0.1);
    CostSpec c{2, {}, 1e-6};
    std::vector<double> x{-1.2, 0.8};
    GenOptions opts;
    opts.seed = 44;
    opts.lambda_div_factor = 0.0;
    auto single = generate_gradcf(m, x, 1, c, opts);
    auto div = generate_diverse(m, x, 1, c, 2, opts);
    REQUIRE(div.cfs.size() == 2);
    for (const auto& cf : div.cfs)
        CHECK(std::fabs(cost(c, cf.delta) - cost(c, single.delta)) < 1e-6);
}

TEST_CASE("proto with zero pull matches gradcf; huge pull lands on the prototype") {
    auto ds = make_synthetic_gaussians(200, 2, 4.0, 51);
    auto m = linear_model({1.0, 0.0}, 0.0);
    CostSpec c{2, {}, 1e-6};
    std::vector<double> x{-2.0, 0.0};

    GenOptions zero;
    zero.seed = 3;
    zero.lambda_proto_factor = 0.0;
    auto base = generate_gradcf(m, x, 1, c, zero);
    auto proto0 = generate_proto(m, ds, x, 1, c, zero);
    REQUIRE(proto0.valid);
    CHECK(std::fabs(cost(c, proto0.delta) - cost(c, base.delta)) < 1e-6);

    GenOptions huge;
    huge.seed = 3;
    huge.lambda_proto_factor = 2000.0; // lambda_proto = 4000 at c_init = 2
    huge.budget = 5000;
    huge.step = 2e-5; // keeps 2*lambda*step < 1 so the pull converges
    auto protoh = generate_proto(m, ds, x, 1, c, huge);
    REQUIRE(protoh.valid);
    // recompute the prototype: mean of 5 nearest reference rows predicted 1
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (m.predict(ds.features.row(i)) == 1)
            cand.push_back({squared_distance(ds.features.row(i), x), i});
    std::sort(cand.begin(), cand.end());
    std::vector<double> proto(2, 0.0);
    for (std::size_t i = 0; i < 5; ++i) axpy(0.2, ds.features.row(cand[i].second), proto);
    CHECK(euclidean(protoh.endpoint(), proto) < 1e-3);
}

TEST_CASE("proto endpoints are more plausible than gradcf endpoints") {
    // two-gaussian data; kde log-likelihood proxy: squared distance to the
    // nearest of the two class means (monotone in the true log-density here)
    auto ds = make_synthetic_gaussians(300, 2, 4.0, 61);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 61;
    auto m = fit(spec, ds);
    CostSpec c{2, {}, 1e-6};
    Rng rng(62);
    int proto_wins = 0, trials = 0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x{rng.normal() - 2.0, rng.normal()};
        if (m.predict(x) != 0) continue;
        GenOptions opts;
        opts.seed = static_cast<std::uint64_t>(t);
        auto g = generate_gradcf(m, x, 1, c, opts);
        auto p = generate_proto(m, ds, x, 1, c, opts);
        if (!g.valid || !p.valid) continue;
        ++trials;
        // log-density of an isotropic gaussian at distance r falls with r^2;
        // class-1 mean sits at (+2, 0)
        const std::vector<double> mean1{2.0, 0.0};
        if (squared_distance(p.endpoint(), mean1) <= squared_distance(g.endpoint(), mean1))
            ++proto_wins;
    }
    REQUIRE(trials >= 50);
    CHECK(static_cast<double>(proto_wins) / trials >= 0.7);
}

TEST_CASE("boundary distance closed form and sentinel") {
    auto m = linear_model({1.0}, 0.0);
    CostSpec c{2, {}, 1e-6};
    GenOptions opts;
    opts.seed = 8;
    const double d3 = boundary_distance(m, std::vector<double>{3.0}, c, opts);
    CHECK(d3 == doctest::Approx(3.0).epsilon(0.05));
    const double d0 = boundary_distance(m, std::vector<double>{1e-9}, c, opts);
    CHECK(d0 <= 0.05);

    // constant classifier never flips: sentinel +inf
    auto stuck = linear_model({0.0}, 1.0);
    GenOptions fast;
    fast.seed = 8;
    fast.budget = 20;
    fast.anneal_rounds = 2;
    CHECK(std::isinf(boundary_distance(stuck, std::vector<double>{0.0}, c, fast)));
}

TEST_CASE("counterfactual json line is canonical") {
    Counterfactual cf;
    cf.x_orig = {1.0, 2.0};
    cf.delta = {0.5, 0.0};
    cf.y_cf = 1;
    cf.valid = true;
    cf.costs = {0.5, 0.5, 1};
    cf.generator = "nun";
    cf.iterations = 0;
    const auto line = counterfactual_to_json(cf, 42);
    CHECK(line ==
          R"({"costs":{"l1":0.5,"l2":0.5,"sparsity":1},"delta":[0.5,0],"generator":"nun",)"
          R"("iterations":0,"seed":42,"valid":true,"x_orig":[1,2],"y_cf":1})");
}
