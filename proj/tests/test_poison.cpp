#include <doctest.h>

#include <chrono>
#include <cmath>

#include "models_impl.hpp"
#include "rlab/poison.hpp"
#include "rlab/rng.hpp"

using namespace rlab;

namespace {

Dataset dataset_1d(std::vector<double> xs, std::vector<int> ys) {
    Dataset ds;
    ds.features = Matrix(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) ds.features.at(i, 0) = xs[i];
    ds.labels = std::move(ys);
    ds.feature_names = {"x0"};
    return ds;
}

double oracle_1nn_cost(const Dataset& train, std::span<const double> x) {
    // resolution adapted to the nearest-opposite radius: constant grid size,
    // error two orders below the expected effect
    double d0 = std::numeric_limits<double>::infinity();
    double d1 = d0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double dist = euclidean(train.features.row(i), x);
        (train.labels[i] == 0 ? d0 : d1) = std::min(train.labels[i] == 0 ? d0 : d1, dist);
    }
    const double radius = std::max(d0, d1);
    const double res = std::max(radius / 150.0, 1e-4);
    return euclidean(closest_boundary_point_1nn(train, x, res), x);
}

} // namespace

TEST_CASE("target set construction per level") {
    auto ds = make_synthetic_gaussians(60, 2, 6.0, 3);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 3;
    auto m = fit(spec, ds);

    TargetSpec global{TargetLevel::global, 0, std::nullopt, std::nullopt};
    auto g = build_target_set(ds, m, global);
    CHECK_FALSE(g.empty());
    for (std::size_t i : g) CHECK(m.predict(ds.features.row(i)) == 0);

    TargetSpec sub{TargetLevel::subgroup, 0, 1, std::nullopt};
    auto s = build_target_set(ds, m, sub);
    CHECK_FALSE(s.empty());
    // subgroup set is a subset of the global set
    for (std::size_t i : s)
        CHECK(std::find(g.begin(), g.end(), i) != g.end());

    TargetSpec local{TargetLevel::local, 0, std::nullopt, 7};
    auto l = build_target_set(ds, m, local);
    CHECK(l == std::vector<std::size_t>{7});

    // all rows predicted 1 and target y=0 on a constant-positive model
    auto pos = TrainedModel(std::make_shared<rlab::detail::LinearSvmModel>(
        std::vector<double>{0.0, 0.0}, 1.0));
    CHECK_THROWS_AS(build_target_set(ds, pos, global), std::runtime_error);

    TargetSpec bad{TargetLevel::subgroup, 0, std::nullopt, std::nullopt};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sample weights: inverse distance with infinity sentinel") {
    auto w1 = sample_weights(std::vector<double>{1.0, 1.0});
    CHECK(w1[0] == doctest::Approx(0.5));
    CHECK(w1[1] == doctest::Approx(0.5));

    auto w2 = sample_weights(std::vector<double>{1.0, 3.0});
    CHECK(w2[0] == doctest::Approx(0.75));
    CHECK(w2[1] == doctest::Approx(0.25));

    const double inf = std::numeric_limits<double>::infinity();
    auto w3 = sample_weights(std::vector<double>{1.0, inf});
    CHECK(w3[0] == doctest::Approx(1.0));
    CHECK(w3[1] == 0.0);

    CHECK_THROWS_AS(sample_weights(std::vector<double>{inf, inf}), std::runtime_error);
}

TEST_CASE("alpha grid conventions") {
    CHECK(alpha_grid(1.0, 1) == std::vector<double>{1.0});
    CHECK(alpha_grid(1.5, 1) == std::vector<double>{1.5});
    CHECK(alpha_grid(1.5, 2) == std::vector<double>{1.0, 1.5});
    auto g = alpha_grid(2.0, 3);
    CHECK(g[1] == doctest::Approx(1.5));
}

TEST_CASE("degenerate grid emits exactly one instance z = x + delta") {
    auto train = dataset_1d({0.0, 2.0}, {0, 1});
    ClassifierSpec spec;
    spec.kind = ClassifierKind::knn;
    auto m = fit(spec, train);
    CostSpec c{2, {}, 1e-6};
    GenOptions gen;
    gen.seed = 1;
    TargetSpec t{TargetLevel::local, 0, std::nullopt, 0};
    PoisonConfig cfg;
    cfg.n = 1;
    cfg.k = 1;
    cfg.alpha_steps = 1;
    cfg.b = 1.0;
    cfg.seed = 1;
    auto ps = generate_poison(train, m, t, cfg, default_cf_engine(m, c, gen));
    REQUIRE(ps.instances.size() == 1);
    CHECK(ps.failures == 0);
    CHECK(ps.instances[0].alpha == 1.0);
    CHECK(ps.instances[0].y == 0);
    // z sits across the pre-poison boundary (predicted != t.y) but carries t.y
    CHECK(m.predict(ps.instances[0].z) == 1);
    // z = x + delta with delta just past the 1-NN midpoint at 1.0
    CHECK(ps.instances[0].z[0] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("theorem 1 instance: poisoning raises the 1-nn boundary cost") {
    auto train = dataset_1d({0.0, 2.0}, {0, 1});
    ClassifierSpec spec;
    spec.kind = ClassifierKind::knn;
    auto m = fit(spec, train);
    CostSpec c{2, {}, 1e-6};
    GenOptions gen;
    gen.seed = 5;
    TargetSpec t{TargetLevel::local, 0, std::nullopt, 0};
    PoisonConfig cfg;
    cfg.n = 1;
    cfg.k = 1;
    cfg.alpha_steps = 1;
    cfg.b = 1.0 + 1e-3;
    cfg.seed = 5;
    auto ps = generate_poison(train, m, t, cfg, default_cf_engine(m, c, gen));
    REQUIRE(ps.instances.size() == 1);

    const std::vector<double> x{0.0};
    const double before = oracle_1nn_cost(train, x);
    CHECK(before == doctest::Approx(1.0).epsilon(0.02));
    const auto poisoned = ps.append_to(train);
    const double after = oracle_1nn_cost(poisoned, x);
    CHECK(after > before);
    // z near 1+, labeled 0: new boundary near midpoint of z and 2
    CHECK(after == doctest::Approx(1.5).epsilon(0.1));
}

TEST_CASE("provenance completeness: instances + failures = n*k*alpha_steps") {
    auto ds = make_synthetic_gaussians(80, 2, 4.0, 9);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 9;
    auto m = fit(spec, ds);
    CostSpec c{2, {}, 1e-6};
    GenOptions gen;
    TargetSpec t{TargetLevel::global, 0, std::nullopt, std::nullopt};
    PoisonConfig cfg;
    cfg.n = 4;
    cfg.k = 3;
    cfg.alpha_steps = 2;
    cfg.b = 1.5;
    cfg.seed = 2;
    auto ps = generate_poison(ds, m, t, cfg, default_cf_engine(m, c, gen));
    CHECK(ps.instances.size() + ps.failures == cfg.n * cfg.k * cfg.alpha_steps);
    for (const auto& inst : ps.instances) {
        CHECK(inst.y == 0); // label purity
        CHECK(inst.alpha >= 1.0);
        CHECK(inst.alpha <= 1.5);
    }
    // determinism
    auto ps2 = generate_poison(ds, m, t, cfg, default_cf_engine(m, c, gen));
    REQUIRE(ps.instances.size() == ps2.instances.size());
    for (std::size_t i = 0; i < ps.instances.size(); ++i)
        CHECK(ps.instances[i].z == ps2.instances[i].z);
}

TEST_CASE("label flip: ceiling rule, involution, exact five percent") {
    auto ds = make_synthetic_gaussians(10, 1, 2.0, 1);
    auto r = label_flip_poison(ds, 0.05, 3);
    CHECK(r.flipped_indices.size() == 1); // ceil(0.5)

    auto twice = label_flip_poison(r.data, 0.05, 3);
    CHECK(twice.data.labels == ds.labels); // involution under the same seed

    auto big = make_synthetic_gaussians(1000, 1, 2.0, 1);
    auto r2 = label_flip_poison(big, 0.05, 7);
    CHECK(r2.flipped_indices.size() == 50);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < 1000; ++i) diff += big.labels[i] != r2.data.labels[i];
    CHECK(diff == 50);

    CHECK_THROWS_AS(label_flip_poison(ds, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(label_flip_poison(ds, 1.0, 0), std::invalid_argument);
}

TEST_CASE("1-nn boundary oracle midpoints") {
    auto t1 = dataset_1d({0.0, 2.0}, {0, 1});
    auto b1 = closest_boundary_point_1nn(t1, std::vector<double>{0.0}, 0.01);
    CHECK(b1[0] == doctest::Approx(1.0).epsilon(0.02));

    auto t2 = dataset_1d({0.0, 2.0, 4.0}, {0, 1, 0});
    auto b2 = closest_boundary_point_1nn(t2, std::vector<double>{4.0}, 0.01);
    CHECK(b2[0] == doctest::Approx(3.0).epsilon(0.02));

    // symmetric 2-d four-point configuration: dense-grid argmin agrees and
    // the returned point is equidistant between its opposing anchors
    Dataset t3;
    t3.features = Matrix(4, 2);
    t3.features.at(0, 0) = 0.0; t3.features.at(0, 1) = 0.0;
    t3.features.at(1, 0) = 2.0; t3.features.at(1, 1) = 2.0;
    t3.features.at(2, 0) = 2.0; t3.features.at(2, 1) = 0.0;
    t3.features.at(3, 0) = 0.0; t3.features.at(3, 1) = 2.0;
    t3.labels = {0, 0, 1, 1};
    t3.feature_names = {"a", "b"};
    const std::vector<double> origin{0.0, 0.0};
    auto b3 = closest_boundary_point_1nn(t3, origin, 0.02);
    double n0 = std::numeric_limits<double>::infinity(), n1 = n0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double dd = euclidean(t3.features.row(i), b3);
        (t3.labels[i] == 0 ? n0 : n1) = std::min(t3.labels[i] == 0 ? n0 : n1, dd);
    }
    CHECK(std::fabs(n0 - n1) < 0.05); // equidistant within resolution
    // nearest boundary point from the origin sits one unit away (bisector of
    // (0,0) and either class-1 corner)
    CHECK(euclidean(b3, origin) == doctest::Approx(1.0).epsilon(0.03));

    Dataset high;
    high.features = Matrix(2, 4);
    high.labels = {0, 1};
    high.feature_names = {"a", "b", "c", "d"};
    CHECK_THROWS_AS(closest_boundary_point_1nn(high, std::vector<double>(4, 0.0), 0.1),
                    std::invalid_argument);
}

TEST_CASE("svm margin poison: slab inequality holds exactly") {
    auto ds = make_synthetic_gaussians(120, 2, 8.0, 21);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.svm.reg_weight = 1000.0;
    spec.svm.epochs = 2000;
    spec.seed = 21;
    auto m = fit(spec, ds);

    auto ps = svm_margin_poison(m, ds, 0.5, 25, 4);
    CHECK(ps.instances.size() == 25);
    const auto& lin = dynamic_cast<const rlab::detail::LinearSvmModel&>(m.impl());
    for (const auto& inst : ps.instances) {
        const double margin = -(dot(lin.weights(), inst.z) + lin.bias());
        CHECK(margin >= 0.5 - 1e-9); // -w'z - b >= 1 - xi
        CHECK(margin < 1.0 + 1e-9);  // inside the margin slab
        CHECK(inst.y == 0);
    }

    // xi -> 1 limit: slab approaches the boundary itself
    auto near_boundary = svm_margin_poison(m, ds, 0.999, 25, 4);
    for (const auto& inst : near_boundary.instances) {
        const double margin = -(dot(lin.weights(), inst.z) + lin.bias());
        CHECK(margin >= 0.001 - 1e-9);
        CHECK(margin < 1.0 + 1e-9);
    }

    // non-separable input rejected
    Dataset overlap = make_synthetic_gaussians(120, 2, 0.5, 22);
    ClassifierSpec ospec = spec;
    ospec.seed = 22;
    auto om = fit(ospec, overlap);
    CHECK_THROWS_AS(svm_margin_poison(om, overlap, 0.5, 5, 0), std::invalid_argument);
}

TEST_CASE("theorem 2: margin poison shifts scores away from the negative class") {
    // retraining with the poison decreases the mean decision score of
    // negative-class test points (one-sided sign test across runs)
    Rng rng(31);
    int decreases = 0;
    const int runs = 20;
    for (int run = 0; run < runs; ++run) {
        auto ds = make_synthetic_gaussians(160, 2, 8.0, 100 + run);
        auto plan = kfold(ds, 4, run);
        auto train = ds.subset(plan.train_indices(0));
        auto test = ds.subset(plan.test_indices(0));

        ClassifierSpec spec;
        spec.kind = ClassifierKind::linear_svm;
        spec.svm.reg_weight = 1000.0;
        spec.svm.epochs = 2000;
        spec.seed = 100 + run;
        auto clean = fit(spec, train);

        PoisonSet ps;
        try {
            ps = svm_margin_poison(clean, train, 0.5, 10, run);
        } catch (const std::invalid_argument&) {
            continue; // not separated at margin; skip this run
        }
        auto poisoned = fit(spec, ps.append_to(train));

        double mean_clean = 0.0, mean_poisoned = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (test.labels[i] != 0) continue;
            mean_clean += clean.decision_score(test.features.row(i));
            mean_poisoned += poisoned.decision_score(test.features.row(i));
            ++count;
        }
        REQUIRE(count > 0);
        if (mean_poisoned < mean_clean) ++decreases;
    }
    // binomial tail: >= 15 of 20 at p=0.5 is already p < 0.021
    CHECK(decreases >= 15);
}

TEST_CASE("verify_poisonous: empty poison gives exactly zero deltas") {
    auto ds = make_synthetic_gaussians(60, 2, 4.0, 41);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 41;
    auto m = fit(spec, ds);
    TargetSpec t{TargetLevel::global, 0, std::nullopt, std::nullopt};
    auto targets = build_target_set(ds, m, t);
    targets.resize(std::min<std::size_t>(targets.size(), 5));

    PoisonSet empty;
    CostSpec c{2, {}, 1e-6};
    auto cf = [&c](const TrainedModel& model, std::span<const double> x, int y_cf,
                   std::uint64_t seed) {
        GenOptions o;
        o.seed = seed;
        return generate_gradcf(model, x, y_cf, c, o);
    };
    auto verdict = verify_poisonous(ds, empty, spec, targets, cf, c);
    REQUIRE_FALSE(verdict.cost_clean.empty());
    for (std::size_t i = 0; i < verdict.cost_clean.size(); ++i)
        CHECK(verdict.cost_poisoned[i] == verdict.cost_clean[i]);
    CHECK(verdict.mean_delta == 0.0);
    CHECK(verdict.median_delta == 0.0);
}

TEST_CASE("verify_poisonous: theorem 1 instance has positive delta") {
    auto train = dataset_1d({0.0, 2.0}, {0, 1});
    ClassifierSpec spec;
    spec.kind = ClassifierKind::knn;
    auto m = fit(spec, train);
    CostSpec c{2, {}, 1e-6};
    GenOptions gen;
    gen.seed = 5;
    TargetSpec t{TargetLevel::local, 0, std::nullopt, 0};
    PoisonConfig cfg;
    cfg.n = 1;
    cfg.k = 1;
    cfg.alpha_steps = 1;
    cfg.b = 1.001;
    cfg.seed = 5;
    auto ps = generate_poison(train, m, t, cfg, default_cf_engine(m, c, gen));

    std::vector<std::size_t> targets{0};
    auto cf = [&c](const TrainedModel& model, std::span<const double> x, int y_cf,
                   std::uint64_t seed) {
        GenOptions o;
        o.seed = seed;
        return generate_gradcf(model, x, y_cf, c, o);
    };
    auto verdict = verify_poisonous(train, ps, spec, targets, cf, c);
    REQUIRE(verdict.cost_clean.size() == 1);
    CHECK(verdict.median_delta > 0.0);
}

TEST_CASE("corollary 1: singleton targets on random tiny 1-nn instances") {
    // Over random small datasets, the attack strictly increases the
    // brute-force boundary cost whenever the clean counterfactual was valid.
    Rng rng(51);
    int checked = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 4 + rng.uniform_index(9); // 4..12
        const std::size_t d = 1 + rng.uniform_index(2); // 1..2
        Dataset ds;
        ds.features = Matrix(n, d);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                ds.features.at(i, j) = rng.uniform(-3.0, 3.0);
            const int y = rng.uniform() < 0.5 ? 0 : 1;
            ds.labels.push_back(y);
            (y == 0 ? has0 : has1) = true;
        }
        if (!has0 || !has1) continue;
        ds.feature_names.resize(d);
        for (std::size_t j = 0; j < d; ++j) ds.feature_names[j] = "x" + std::to_string(j);

        ClassifierSpec spec;
        spec.kind = ClassifierKind::knn;
        auto m = fit(spec, ds);
        const std::size_t target = rng.uniform_index(n);

        CostSpec c{2, {}, 1e-6};
        GenOptions gen;
        gen.seed = static_cast<std::uint64_t>(trial);
        TargetSpec t{TargetLevel::local, m.predict(ds.features.row(target)), std::nullopt,
                     target};
        PoisonConfig cfg;
        cfg.n = 1;
        cfg.k = 1;
        cfg.alpha_steps = 1;
        cfg.b = 1.0 + 1e-3;
        cfg.seed = static_cast<std::uint64_t>(trial);

        PoisonSet ps;
        try {
            ps = generate_poison(ds, m, t, cfg, default_cf_engine(m, c, gen));
        } catch (const std::runtime_error&) {
            continue; // clean counterfactual failed; out of scope
        }
        const auto x = ds.features.row(target);
        const double before = oracle_1nn_cost(ds, x);
        const double after = oracle_1nn_cost(ps.append_to(ds), x);
        CHECK(after > before);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("poison runtime scales linearly in n") {
    auto ds = make_synthetic_gaussians(200, 3, 4.0, 61);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 61;
    auto m = fit(spec, ds);
    CostSpec c{2, {}, 1e-6};
    GenOptions gen;
    TargetSpec t{TargetLevel::global, 0, std::nullopt, std::nullopt};

    auto timed = [&](std::size_t n) {
        PoisonConfig cfg;
        cfg.n = n;
        cfg.k = 1;
        cfg.alpha_steps = 1;
        cfg.b = 1.5;
        cfg.seed = 1;
        const auto engine = default_cf_engine(m, c, gen);
        const auto start = std::chrono::steady_clock::now();
        auto ps = generate_poison(ds, m, t, cfg, engine);
        const auto stop = std::chrono::steady_clock::now();
        CHECK(ps.instances.size() + ps.failures == n);
        return std::chrono::duration<double>(stop - start).count();
    };

    timed(8); // warm-up
    double t8 = 1e9, t32 = 1e9;
    for (int rep = 0; rep < 3; ++rep) { // min over repeats to damp noise
        t8 = std::min(t8, timed(8));
        t32 = std::min(t32, timed(32));
    }
    CHECK(t32 / t8 <= 4.0 * 1.3);
}

TEST_CASE("poison set json round trip") {
    auto ds = make_synthetic_gaussians(40, 2, 4.0, 71);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::linear_svm;
    spec.seed = 71;
    auto m = fit(spec, ds);
    CostSpec c{2, {}, 1e-6};
    GenOptions gen;
    TargetSpec t{TargetLevel::global, 0, std::nullopt, std::nullopt};
    PoisonConfig cfg;
    cfg.n = 2;
    cfg.k = 2;
    cfg.seed = 8;
    auto ps = generate_poison(ds, m, t, cfg, default_cf_engine(m, c, gen));

    const auto text = poison_set_to_json(ps);
    auto loaded = poison_set_from_json(text);
    CHECK(poison_set_to_json(loaded) == text);
    REQUIRE(loaded.instances.size() == ps.instances.size());
    for (std::size_t i = 0; i < ps.instances.size(); ++i) {
        CHECK(loaded.instances[i].z == ps.instances[i].z);
        CHECK(loaded.instances[i].alpha == ps.instances[i].alpha);
        CHECK(loaded.instances[i].source_row == ps.instances[i].source_row);
    }
}
