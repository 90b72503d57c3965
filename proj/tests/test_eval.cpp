#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "rlab/eval.hpp"
#include "rlab/json_io.hpp"
#include "rlab/linalg.hpp"

using namespace rlab;

namespace {

ExperimentConfig small_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.data.n = 120;
    cfg.data.d = 3;
    cfg.data.separation = 4.0;
    cfg.classifier.kind = ClassifierKind::linear_svm;
    cfg.classifier.svm.epochs = 400;
    cfg.cf_method = CfMethod::gradcf;
    cfg.budgets = {0.05};
    cfg.folds = 3;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("cost_diff_pct arithmetic") {
    CHECK(cost_diff_pct(1.11, 1.0) == doctest::Approx(0.11));
    CHECK(cost_diff_pct(2.0, 2.0) == doctest::Approx(0.0));
    CHECK(cost_diff_pct(0.90, 1.0) == doctest::Approx(-0.10));
    CHECK_THROWS_AS(cost_diff_pct(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("subgroup gap percentage") {
    std::vector<double> g0{1.0, 1.0, 1.0}, g1{2.0, 2.0, 2.0};
    // clean gap 1.0, poisoned gap 2.0 -> +100%
    std::vector<double> p0{1.0, 1.0}, p1{3.0, 3.0};
    auto r = subgroup_gap_pct(g0, g1, p0, p1);
    REQUIRE(r.has_value());
    CHECK(*r == doctest::Approx(1.0));

    // identical distributions pre/post -> 0
    auto r2 = subgroup_gap_pct(g0, g1, g0, g1);
    CHECK(*r2 == doctest::Approx(0.0));

    // halving the gap -> -0.5
    std::vector<double> h0{1.0}, h1{1.5};
    auto r3 = subgroup_gap_pct(g0, g1, h0, h1);
    CHECK(*r3 == doctest::Approx(-0.5));

    // zero clean gap -> sentinel
    auto r4 = subgroup_gap_pct(g0, g0, p0, p1);
    CHECK_FALSE(r4.has_value());

    std::vector<double> empty;
    CHECK_THROWS_AS(subgroup_gap_pct(empty, g1, p0, p1), std::invalid_argument);
}

TEST_CASE("zero budget yields exactly zero diffs and ns everywhere") {
    auto cfg = small_config(5);
    cfg.budgets = {0.0};
    auto rep = run_experiment(cfg);
    auto* diff = rep.find("cost_diff_pct", 0.0);
    REQUIRE(diff != nullptr);
    for (double v : diff->values) CHECK(v == 0.0);
    CHECK(diff->median == 0.0);
    CHECK(diff->stars == "ns");
    auto* sp = rep.find("sparsity_diff", 0.0);
    for (double v : sp->values) CHECK(v == 0.0);
    auto* ll = rep.find("kde_loglik_diff", 0.0);
    for (double v : ll->values) CHECK(v == 0.0);
    auto* f1c = rep.find("f1_clean", 0.0);
    auto* f1p = rep.find("f1_poisoned", 0.0);
    CHECK(f1c->median == f1p->median);
}

TEST_CASE("report json is byte-identical across runs and worker counts") {
    auto cfg = small_config(9);
    auto serial = run_experiment(cfg);
    auto cfg_par = cfg;
    cfg_par.workers = 4;
    auto parallel = run_experiment(cfg_par);
    // worker count is runtime-only; reports must match byte for byte
    CHECK(report_to_json(serial) == report_to_json(parallel));

    auto rerun = run_experiment(cfg);
    CHECK(report_to_json(serial) == report_to_json(rerun));
}

TEST_CASE("median recomputation from stored values") {
    auto cfg = small_config(11);
    auto rep = run_experiment(cfg);
    REQUIRE_FALSE(rep.records.empty());
    for (const auto& r : rep.records) {
        CHECK(r.median == doctest::Approx(median_of(r.values)).epsilon(1e-12));
        // stars consistent with the p-value
        if (r.p_value <= 0.001)
            CHECK(r.stars == "***");
        else if (r.p_value <= 0.01)
            CHECK(r.stars == "**");
        else if (r.p_value <= 0.05)
            CHECK(r.stars == "*");
        else
            CHECK(r.stars == "ns");
    }
}

TEST_CASE("config json round trip is lossless") {
    ExperimentConfig cfg = small_config(21);
    cfg.cf_method = CfMethod::proto;
    cfg.attack = AttackKind::label_flip;
    cfg.target.level = TargetLevel::subgroup;
    cfg.target.subgroup_value = 1;
    cfg.uniform_sampling = true;
    cfg.cost.p = 2;
    cfg.budgets = {0.05, 0.2};
    const auto text = config_to_json(cfg);
    auto back = config_from_json(text);
    CHECK(config_to_json(back) == text);
    CHECK(back.cf_method == CfMethod::proto);
    CHECK(back.attack == AttackKind::label_flip);
    CHECK(back.target.level == TargetLevel::subgroup);
    CHECK(back.uniform_sampling);
    CHECK(back.budgets == std::vector<double>{0.05, 0.2});
}

TEST_CASE("config validation failures") {
    auto cfg = small_config(1);
    cfg.folds = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config(1);
    cfg.budgets = {1.5};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config(1);
    cfg.data.kind = DataSource::Kind::csv;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("subgroup experiment produces gap records") {
    auto cfg = small_config(31);
    cfg.data.n = 200;
    cfg.target.level = TargetLevel::subgroup;
    cfg.target.subgroup_value = 0;
    auto rep = run_experiment(cfg);
    auto* gap = rep.find("subgroup_gap_pct", 0.05);
    REQUIRE(gap != nullptr);
    CHECK_FALSE(gap->values.empty());
}

TEST_CASE("local experiment records spillover separately") {
    auto cfg = small_config(41);
    cfg.data.n = 160;
    cfg.target.level = TargetLevel::local;
    cfg.target.local_index = 0; // first test row of each fold
    auto rep = run_experiment(cfg);
    auto* spill = rep.find("spillover_cost_diff_pct", 0.05);
    REQUIRE(spill != nullptr);
    CHECK_FALSE(spill->values.empty());
}

TEST_CASE("emit_report writes the requested formats") {
    auto cfg = small_config(51);
    cfg.budgets = {0.0, 0.05};
    auto rep = run_experiment(cfg);
    const std::string dir = "/tmp/rlab_test_emit";
    std::filesystem::remove_all(dir);
    auto files = emit_report(rep, dir, {"json", "csv", "svg"});
    REQUIRE(files.paths.size() == 3);
    const auto json_text = read_file(dir + "/report.json");
    CHECK(json_text == report_to_json(rep));
    const auto csv_text = read_file(dir + "/report.csv");
    CHECK(csv_text.rfind("budget,fold,metric,count,median,p_value,stars\n", 0) == 0);
    // one header plus one row per record
    const auto lines = std::count(csv_text.begin(), csv_text.end(), '\n');
    CHECK(static_cast<std::size_t>(lines) == rep.records.size() + 1);
    const auto svg_text = read_file(dir + "/report.svg");
    CHECK(svg_text.rfind("<svg", 0) == 0);
    CHECK(svg_text.find("cost_diff_pct") != std::string::npos);
    CHECK_THROWS_AS(emit_report(rep, dir, {"pdf"}), std::invalid_argument);
}

TEST_CASE("empty record list still emits valid artifacts") {
    ExperimentReport rep;
    rep.config = small_config(1);
    const auto json_text = report_to_json(rep);
    CHECK(json_text.find("\"records\":[]") != std::string::npos);
    const auto csv_text = report_to_csv(rep);
    CHECK(csv_text == "budget,fold,metric,count,median,p_value,stars\n");
}

TEST_CASE("attack raises recourse cost while flips do not (sanity contrast)") {
    auto cfg = small_config(61);
    cfg.data.n = 300;
    cfg.folds = 5;
    auto rep = run_experiment(cfg);
    auto* diff = rep.find("cost_diff_pct", 0.05);
    REQUIRE(diff != nullptr);
    CHECK(diff->median > 0.0);

    auto flip_cfg = cfg;
    flip_cfg.attack = AttackKind::label_flip;
    auto flip_rep = run_experiment(flip_cfg);
    auto* flip_diff = flip_rep.find("cost_diff_pct", 0.05);
    REQUIRE(flip_diff != nullptr);
    CHECK(flip_diff->median < diff->median);
}
