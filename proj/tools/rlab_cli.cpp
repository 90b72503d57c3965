// Command-line laboratory binding the library modules: training, explaining,
// poisoning, defending, and running the evaluation protocol end to end.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rlab/dataset.hpp"
#include "rlab/defense.hpp"
#include "rlab/eval.hpp"
#include "rlab/json_io.hpp"
#include "rlab/models.hpp"
#include "rlab/poison.hpp"
#include "rlab/recourse.hpp"
#include "rlab/rng.hpp"
#include "rlab/svg.hpp"
#include "rlab/wdn.hpp"

namespace {

using namespace rlab;

constexpr const char* kSeedEnvVar = "RECOURSE_LAB_SEED";

struct OutputFile {
    std::string name; // relative to the output directory
    std::string content;
};

struct RunContext {
    std::string command;
    std::string out_dir;
    std::string config_echo = "{}"; // canonical JSON text
    std::uint64_t seed = 0;
    std::string seed_source = "default";
    std::vector<OutputFile> outputs;

    void add(const std::string& name, std::string content) {
        outputs.push_back({name, std::move(content)});
    }

    void flush(const std::string& error = "") {
        std::filesystem::create_directories(out_dir);
        for (const auto& file : outputs) write_file(out_dir + "/" + file.name, file.content);

        auto sorted = outputs;
        std::sort(sorted.begin(), sorted.end(),
                  [](const OutputFile& a, const OutputFile& b) { return a.name < b.name; });
        JsonWriter w;
        w.begin_object();
        w.key("command");
        w.value(command);
        w.key("config");
        w.value_raw(config_echo);
        if (!error.empty()) {
            w.key("error");
            w.value(error);
        }
        w.key("outputs");
        w.begin_array();
        for (const auto& file : sorted) {
            w.begin_object();
            w.key("bytes");
            w.value(file.content.size());
            w.key("fnv64");
            w.value(fnv1a_hex(std::span<const char>(file.content.data(),
                                                    file.content.size())));
            w.key("path");
            w.value(file.name);
            w.end_object();
        }
        w.end_array();
        w.key("schema_version");
        w.value(1);
        w.key("seed");
        w.value(seed);
        w.key("seed_source");
        w.value(seed_source);
        w.end_object();
        write_file(out_dir + "/manifest.json", w.take());
    }
};

// Precedence: --seed flag, then an explicit config value, then the
// environment override, then the built-in default.
void resolve_seed(RunContext& ctx, ExperimentConfig& cfg, bool flag_set,
                  std::uint64_t flag_seed, bool config_has_seed) {
    if (flag_set) {
        cfg.seed = flag_seed;
        ctx.seed_source = "flag";
    } else if (config_has_seed) {
        ctx.seed_source = "config";
    } else if (const char* env = std::getenv(kSeedEnvVar)) {
        cfg.seed = std::strtoull(env, nullptr, 10);
        ctx.seed_source = "env";
    }
    ctx.seed = cfg.seed;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.data.kind == DataSource::Kind::synthetic)
        return make_synthetic_gaussians(cfg.data.n, cfg.data.d, cfg.data.separation,
                                        derive_seed(cfg.seed, 0xda7a));
    return load_csv(cfg.data.path, cfg.data.target_column, cfg.data.sensitive_column);
}

ExperimentConfig parse_config_file(const std::string& path, bool& has_seed) {
    const auto text = read_file(path);
    has_seed = nlohmann::json::parse(text).contains("seed");
    return config_from_json(text);
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Counterfactual explain_one(const ExperimentConfig& cfg, const TrainedModel& model,
                           const Dataset& reference, std::span<const double> x,
                           std::uint64_t seed) {
    GenOptions opts = cfg.gen;
    opts.seed = seed;
    switch (cfg.cf_method) {
        case CfMethod::nun: return generate_nun(model, reference, x, 1, cfg.cost);
        case CfMethod::gradcf: return generate_gradcf(model, x, 1, cfg.cost, opts);
        case CfMethod::diverse: {
            auto set = generate_diverse(model, x, 1, cfg.cost, 3, opts);
            Counterfactual best;
            double best_cost = std::numeric_limits<double>::infinity();
            for (auto& cf : set.cfs) {
                const double c = cost(cfg.cost, cf.delta);
                if (c < best_cost) {
                    best_cost = c;
                    best = std::move(cf);
                }
            }
            if (set.cfs.empty()) best.x_orig.assign(x.begin(), x.end());
            return best;
        }
        case CfMethod::proto: return generate_proto(model, reference, x, 1, cfg.cost, opts);
    }
    throw std::logic_error("unknown cf method");
}

PoisonSet build_poison(const ExperimentConfig& cfg, const Dataset& ds,
                       const TrainedModel& model) {
    const double budget = cfg.budgets.empty() ? 0.05 : cfg.budgets.front();
    const auto emitted =
        static_cast<std::size_t>(std::llround(budget * static_cast<double>(ds.size())));
    if (emitted == 0) throw std::invalid_argument("poison: budget yields zero instances");
    PoisonConfig pcfg;
    pcfg.k = cfg.poison_k;
    pcfg.b = cfg.poison_b;
    pcfg.alpha_steps = cfg.alpha_steps;
    pcfg.n = (emitted + cfg.poison_k * cfg.alpha_steps - 1) /
             (cfg.poison_k * cfg.alpha_steps);
    pcfg.uniform_sampling = cfg.uniform_sampling;
    pcfg.seed = derive_seed(cfg.seed, 0xa17a);
    auto ps = generate_poison(ds, model, cfg.target, pcfg,
                              default_cf_engine(model, cfg.cost, cfg.gen));
    if (ps.instances.size() > emitted) ps.instances.resize(emitted);
    return ps;
}

std::string dataset_to_csv(const Dataset& ds) {
    std::string out;
    for (const auto& name : ds.feature_names) out += name + ",";
    if (ds.has_sensitive()) out += "sensitive,";
    out += "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j)
            out += format_double(ds.features.at(i, j), 17) + ",";
        if (ds.has_sensitive()) out += std::to_string(ds.sensitive[i]) + ",";
        out += std::to_string(ds.labels[i]) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_train(RunContext& ctx, const ExperimentConfig& cfg) {
    const auto ds = load_dataset(cfg);
    ClassifierSpec spec = cfg.classifier;
    spec.seed = derive_seed(cfg.seed, 0x30de1);
    const auto model = fit(spec, ds);
    ctx.add("model.json", save_model(model, spec));
    ctx.flush();
    return 0;
}

int cmd_explain(RunContext& ctx, const ExperimentConfig& cfg,
                const std::string& model_path) {
    const auto ds = load_dataset(cfg);
    TrainedModel model;
    if (!model_path.empty()) {
        model = load_model(read_file(model_path)).first;
        if (model.dim() != ds.dim())
            throw std::invalid_argument("explain: model dimension does not match data");
    } else {
        ClassifierSpec spec = cfg.classifier;
        spec.seed = derive_seed(cfg.seed, 0x30de1);
        model = fit(spec, ds);
    }
    std::string lines;
    std::size_t negatives = 0, failures = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = ds.features.row(i);
        if (model.predict(x) != 0) continue;
        ++negatives;
        const std::uint64_t seed = derive_seed(cfg.seed, 0xcf0, i);
        const auto cf = explain_one(cfg, model, ds, x, seed);
        if (!cf.valid) ++failures;
        lines += counterfactual_to_json(cf, seed) + "\n";
    }
    ctx.add("counterfactuals.jsonl", lines);
    ctx.flush();
    std::cerr << "explained " << negatives << " negatives (" << failures << " failures)\n";
    return 0;
}

int cmd_poison(RunContext& ctx, const ExperimentConfig& cfg, const std::string& poison_out) {
    const auto ds = load_dataset(cfg);
    ClassifierSpec spec = cfg.classifier;
    spec.seed = derive_seed(cfg.seed, 0x30de1);
    const auto model = fit(spec, ds);
    const auto ps = build_poison(cfg, ds, model);
    ctx.add(poison_out, poison_set_to_json(ps));
    ctx.flush();
    return 0;
}

int cmd_flip(RunContext& ctx, const ExperimentConfig& cfg) {
    const auto ds = load_dataset(cfg);
    const double fraction = cfg.budgets.empty() ? 0.05 : cfg.budgets.front();
    const auto flipped = label_flip_poison(ds, fraction, derive_seed(cfg.seed, 0xf11b));
    ctx.add("flipped.csv", dataset_to_csv(flipped.data));
    JsonWriter w;
    w.begin_object();
    w.key("flipped_indices");
    w.value(flipped.flipped_indices);
    w.key("fraction");
    w.value(fraction);
    w.key("schema_version");
    w.value(1);
    w.end_object();
    ctx.add("flip_indices.json", w.take());
    ctx.flush();
    return 0;
}

int cmd_defend(RunContext& ctx, const ExperimentConfig& cfg, const std::string& poison_in,
               const std::string& method_csv, double fpr) {
    const auto ds = load_dataset(cfg);
    const auto ps = poison_set_from_json(read_file(poison_in));

    // fold 0 of a stratified split serves as the clean hold-out
    const auto plan = kfold(ds, 5, derive_seed(cfg.seed, 0xf01d));
    const auto holdout = ds.subset(plan.test_indices(0));
    const auto base = ds.subset(plan.train_indices(0));
    auto combined = ps.append_to(base);
    std::vector<std::size_t> poison_idx;
    for (std::size_t i = base.size(); i < combined.size(); ++i) poison_idx.push_back(i);

    const auto methods = method_csv == "all"
                             ? std::vector<std::string>{"iforest", "lof", "knn_defense",
                                                        "l2_defense", "slab_defense"}
                             : split_list(method_csv);
    for (const auto& name : methods) {
        DefenseSpec dspec;
        dspec.method = defense_method_from_string(name);
        dspec.calibration_fpr = fpr;
        dspec.seed = derive_seed(cfg.seed, 0xdef);
        const auto report = run_defense(combined.features, combined.labels, holdout.features,
                                        holdout.labels, poison_idx, dspec);
        ctx.add("detection_" + name + ".json", detection_report_to_json(report));
        std::cerr << name << ": recall " << report.recall << "\n";
    }
    ctx.flush();
    return 0;
}

int cmd_evaluate(RunContext& ctx, ExperimentConfig cfg, const std::string& formats_csv,
                 bool force_uniform) {
    if (force_uniform) cfg.uniform_sampling = true;
    ctx.config_echo = config_to_json(cfg);
    const auto report = run_experiment(cfg);
    const auto formats = split_list(formats_csv);
    for (const auto& format : formats) {
        if (format == "json")
            ctx.add("report.json", report_to_json(report));
        else if (format == "csv")
            ctx.add("report.csv", report_to_csv(report));
        else if (format == "svg")
            ctx.add("report.svg", render_report_svg(report));
        else
            throw std::invalid_argument("unknown report format: " + format);
    }
    ctx.flush();
    return 0;
}

int cmd_wdn_demo(RunContext& ctx) {
    WdnCaseConfig cfg;
    const auto sets = build_case_sets(ctx.seed, cfg);
    auto dump_set = [&](const std::vector<SensorScenario>& scenarios,
                        const std::string& prefix) {
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            ctx.add(prefix + "_" + std::to_string(i) + ".csv",
                    scenario_to_csv(scenarios[i]));
            if (!scenarios[i].faults.empty())
                ctx.add(prefix + "_" + std::to_string(i) + "_faults.json",
                        scenario_faults_to_json(scenarios[i]));
        }
    };
    dump_set(sets.train, "scenario_train");
    dump_set(sets.attack, "scenario_attack");
    dump_set(sets.eval, "scenario_eval");

    const auto report = run_case_study(ctx.seed, cfg);
    ctx.add("wdn_report.json", wdn_report_to_json(report));

    // the clean and poisoned sparsity distributions side by side
    const auto* clean = report.find("sparsity_clean");
    const auto* poisoned = report.find("sparsity_poisoned");
    ctx.add("sparsity.svg",
            render_histogram_pair_svg("alarm repair sparsity", "clean",
                                      clean ? clean->values : std::vector<double>{},
                                      "poisoned",
                                      poisoned ? poisoned->values : std::vector<double>{}));

    // split reports mirror the two evaluation passes
    WdnReport clean_rep = report;
    clean_rep.records.clear();
    WdnReport poison_rep = report;
    poison_rep.records.clear();
    for (const auto& r : report.records) {
        if (r.name.find("poisoned") != std::string::npos)
            poison_rep.records.push_back(r);
        else
            clean_rep.records.push_back(r);
    }
    ctx.add("report_clean.json", wdn_report_to_json(clean_rep));
    ctx.add("report_poisoned.json", wdn_report_to_json(poison_rep));
    ctx.flush();
    return 0;
}

int cmd_report(RunContext& ctx, const std::string& in_path,
               const std::string& formats_csv) {
    const auto report = report_from_json(read_file(in_path));
    ctx.config_echo = config_to_json(report.config);
    ctx.seed = report.seed;
    ctx.seed_source = "report";
    for (const auto& format : split_list(formats_csv)) {
        if (format == "json")
            ctx.add("report.json", report_to_json(report));
        else if (format == "csv")
            ctx.add("report.csv", report_to_csv(report));
        else if (format == "svg")
            ctx.add("report.svg", render_report_svg(report));
        else
            throw std::invalid_argument("unknown report format: " + format);
    }
    ctx.flush();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual recourse poisoning laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", formats = "json";
    std::string model_path, poison_in, poison_out = "poison.json";
    std::string defense_methods = "all", report_in;
    double defend_fpr = 0.05;
    std::uint64_t seed_flag = 0;
    std::string budgets_override;
    std::size_t workers = std::thread::hardware_concurrency();

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed_flag, "seed override (highest precedence)");
        return sub;
    };

    auto* train = add_common(app.add_subcommand("train", "fit a classifier"), true);
    auto* explain =
        add_common(app.add_subcommand("explain", "counterfactuals for negatives"), true);
    explain->add_option("--model", model_path, "reuse a saved model.json");
    auto* poison =
        add_common(app.add_subcommand("poison", "craft a poisonous data set"), true);
    poison->add_option("--poison-out", poison_out, "poison file name");
    auto* flip = add_common(app.add_subcommand("flip", "label flipping baseline"), true);
    auto* defend = add_common(app.add_subcommand("defend", "sanitization battery"), true);
    defend->add_option("--poison-in", poison_in, "poison set to detect")->required();
    defend->add_option("--methods", defense_methods, "comma list or 'all'");
    defend->add_option("--fpr", defend_fpr, "calibration false-positive rate");
    auto* evaluate =
        add_common(app.add_subcommand("evaluate", "cross-validated poisoning protocol"),
                   true);
    evaluate->add_option("--formats", formats, "comma list: json,csv,svg");
    evaluate->add_option("--workers", workers, "parallel fold workers");
    evaluate->add_option("--budgets", budgets_override, "comma list of fractions");
    auto* ablation = add_common(
        app.add_subcommand("ablation", "evaluate with uniform attack sampling"), true);
    ablation->add_option("--formats", formats, "comma list: json,csv,svg");
    ablation->add_option("--workers", workers, "parallel fold workers");
    ablation->add_option("--budgets", budgets_override, "comma list of fractions");
    auto* wdn = add_common(app.add_subcommand("wdn-demo", "sensor-network case study"),
                           false);
    auto* report_cmd = add_common(app.add_subcommand("report", "re-render a report"), false);
    report_cmd->add_option("--in", report_in, "report.json to render")->required();
    report_cmd->add_option("--formats", formats, "comma list: json,csv,svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: cli: " << e.what() << "\n";
        return 1;
    }

    RunContext ctx;
    ctx.out_dir = out_dir;
    int validation_phase = 1; // config/validation failures exit 1, runtime 2
    try {
        ExperimentConfig cfg;
        bool config_has_seed = false;
        if (!config_path.empty()) cfg = parse_config_file(config_path, config_has_seed);
        const bool seed_flag_set =
            train->count("--seed") || explain->count("--seed") ||
            poison->count("--seed") || flip->count("--seed") ||
            defend->count("--seed") || evaluate->count("--seed") ||
            ablation->count("--seed") || wdn->count("--seed") ||
            report_cmd->count("--seed");
        resolve_seed(ctx, cfg, seed_flag_set, seed_flag, config_has_seed);
        if (!budgets_override.empty()) {
            cfg.budgets.clear();
            for (const auto& tok : split_list(budgets_override))
                cfg.budgets.push_back(std::stod(tok));
        }
        cfg.workers = workers;
        ctx.config_echo = config_path.empty() ? "{}" : config_to_json(cfg);

        validation_phase = 0; // config parsed; failures below are runtime
        if (train->parsed()) {
            ctx.command = "train";
            return cmd_train(ctx, cfg);
        }
        if (explain->parsed()) {
            ctx.command = "explain";
            return cmd_explain(ctx, cfg, model_path);
        }
        if (poison->parsed()) {
            ctx.command = "poison";
            return cmd_poison(ctx, cfg, poison_out);
        }
        if (flip->parsed()) {
            ctx.command = "flip";
            return cmd_flip(ctx, cfg);
        }
        if (defend->parsed()) {
            ctx.command = "defend";
            return cmd_defend(ctx, cfg, poison_in, defense_methods, defend_fpr);
        }
        if (evaluate->parsed()) {
            ctx.command = "evaluate";
            return cmd_evaluate(ctx, cfg, formats, false);
        }
        if (ablation->parsed()) {
            ctx.command = "ablation";
            return cmd_evaluate(ctx, cfg, formats, true);
        }
        if (wdn->parsed()) {
            ctx.command = "wdn-demo";
            return cmd_wdn_demo(ctx);
        }
        if (report_cmd->parsed()) {
            ctx.command = "report";
            return cmd_report(ctx, report_in, formats);
        }
        std::cerr << "error: cli: no subcommand\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        try {
            ctx.flush(e.what());
        } catch (...) {
        }
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        try {
            ctx.flush(e.what());
        } catch (...) {
        }
        return validation_phase ? 1 : 2;
    }
}
