#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "frgnn/config.hpp"
#include "frgnn/experiment.hpp"
#include "frgnn/report.hpp"
#include "frgnn/theory.hpp"

namespace frgnn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct CliArgs {
    std::string command;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string run;
};

namespace detail {

namespace fs = std::filesystem;

inline Config load_config_arg(const CliArgs& a) {
    if (a.config.empty()) throw ConfigError(a.command + ": --config FILE is required");
    Config cfg = Config::load(a.config);
    if (cfg.has("data.bundle")) {
        const fs::path p = cfg.get_path("data.bundle", "");
        std::error_code ec;
        const fs::path abs = fs::weakly_canonical(p, ec);
        cfg.set("data.bundle", (ec ? fs::absolute(p) : abs).string());
    }
    return cfg;
}

inline fs::path out_dir(const CliArgs& a, const Config& cfg, const std::string& fallback) {
    fs::path p = a.out.empty() ? fs::path(cfg.get_string("output.dir", fallback)) : fs::path(a.out);
    fs::create_directories(p);
    return p;
}

inline fs::path run_dir(const CliArgs& a) {
    const std::string d = !a.run.empty() ? a.run : a.out;
    if (d.empty()) throw ConfigError(a.command + ": --run DIR (or --out DIR) naming a train run is required");
    if (!fs::is_directory(d)) throw ConfigError(a.command + ": run directory not found: " + d);
    return d;
}

inline Json config_json(const Config& cfg) {
    Json j = Json::object();
    for (const auto& [k, v] : cfg.resolved()) j[k] = v;
    return j;
}

inline void warn_unused(const Config& cfg, Json& manifest) {
    const auto unused = cfg.unused_keys();
    for (const auto& k : unused) std::cerr << "warning: config key '" << k << "' is not used by this command\n";
    manifest["ignored_keys"] = unused;
}

inline Json model_json(const ModelSpec& spec, const TrainHyper& th) {
    Json j;
    j["arch"] = std::string(to_string(spec.arch));
    j["in_dim"] = spec.in_dim;
    j["num_classes"] = spec.num_classes;
    j["hidden"] = spec.hyper.hidden;
    j["dropout"] = spec.hyper.dropout;
    j["appnp_k"] = spec.hyper.appnp_k;
    j["appnp_alpha"] = spec.hyper.appnp_alpha;
    j["lr"] = th.lr;
    j["weight_decay"] = th.weight_decay;
    j["epochs"] = th.epochs;
    j["patience"] = th.patience;
    return j;
}

struct LoadedRun {
    Config cfg;
    ExperimentSettings settings;
    Dataset data;
    SplitMasks split;
    std::uint64_t init_seed = 0;
    std::uint64_t split_seed = 0;
    std::optional<TrainedModel> model;
};

/// Rebuilds the dataset, split and frozen model of a train run directory.
inline LoadedRun load_run(const fs::path& dir) {
    if (!fs::is_regular_file(dir / "manifest.json")) throw ConfigError("run directory has no manifest.json: " + dir.string());
    if (!fs::is_regular_file(dir / "checkpoint.frgn")) throw ConfigError("missing checkpoint: " + (dir / "checkpoint.frgn").string());
    Json m;
    try {
        m = Json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest.json: ") + e.what());
    }
    LoadedRun r;
    for (const auto& [k, v] : m.at("config").items()) r.cfg.set(k, v.get<std::string>());
    r.settings = read_settings(r.cfg);
    r.init_seed = m.at("init_seed").get<std::uint64_t>();
    r.split_seed = m.at("split_seed").get<std::uint64_t>();
    r.data = load_dataset(r.settings);
    r.split = split_from_json(nlohmann::json::parse(read_file(dir / "split.json")));
    r.split.validate(r.data.bundle.meta.num_nodes);
    ParamSet params = load_checkpoint(dir / "checkpoint.frgn");
    const ModelSpec spec = model_spec(r.data, r.settings, r.settings.arch);
    Rng layout_rng(0);
    const ParamSet ref = init_params(spec, layout_rng);
    if (!params.same_layout(ref)) throw DataError("checkpoint does not match the configured model");
    r.model.emplace(spec, std::move(params), r.data.ops);
    return r;
}

inline std::uint64_t seed_of(const CliArgs& a, const Config& cfg) {
    return a.seed ? *a.seed : cfg.get_count("run.seed", 0);
}

} // namespace detail

inline int cmd_train(const CliArgs& a) {
    Config cfg = detail::load_config_arg(a);
    const ExperimentSettings s = read_settings(cfg);
    const std::uint64_t init_seed = detail::seed_of(a, cfg);
    const std::uint64_t split_seed = cfg.get_count("split.seed", init_seed);
    const auto dir = detail::out_dir(a, cfg, "runs/train");

    const Dataset d = load_dataset(s);
    const SplitMasks split = make_split(d, s, split_seed);
    const ModelSpec spec = model_spec(d, s, s.arch);
    const TrainResult tr = train_model(d.ops, d.features, d.labels(), split.train, split.val, spec, s.train,
                                       train_rng(init_seed));
    const DenseMatrix logits = tr.model.forward(d.features).logits;
    const double train_acc = accuracy(logits, d.labels(), split.train);
    const double val_acc = split.val.empty() ? 0.0 : accuracy(logits, d.labels(), split.val);
    const double test_acc = accuracy(logits, d.labels(), split.test);

    save_checkpoint(tr.model.params(), dir / "checkpoint.frgn");
    write_json(dir / "split.json", to_json(split));
    CsvTable curve({"epoch", "train_loss", "train_acc", "val_acc", "val_loss"});
    for (const auto& e : tr.curve)
        curve.add({std::to_string(e.epoch), format_real(e.train_loss), format_real(e.train_acc), format_real(e.val_acc),
                   format_real(e.val_loss)});
    curve.write(dir / "metrics.csv");

    Json m;
    m["command"] = "train";
    m["dataset"] = d.bundle.meta.name;
    m["init_seed"] = init_seed;
    m["split_seed"] = split_seed;
    m["model"] = detail::model_json(spec, s.train);
    m["split"] = to_json(split)["provenance"];
    m["split_sizes"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    m["metrics"] = {{"train_accuracy", train_acc}, {"val_accuracy", val_acc}, {"test_accuracy", test_acc},
                    {"best_epoch", tr.best_epoch}, {"epochs_run", tr.curve.size()}};
    m["checkpoint_hash"] = hex64(tr.model.checkpoint_hash());
    detail::warn_unused(cfg, m);
    m["config"] = detail::config_json(cfg);
    write_json(dir / "manifest.json", m);
    std::cout << "train " << to_string(spec.arch) << " on " << d.bundle.meta.name << ": test accuracy "
              << format_fixed(100.0 * test_acc, 2) << "% (best epoch " << tr.best_epoch << ") -> " << dir.string()
              << "\n";
    return kExitOk;
}

inline int cmd_fr(const CliArgs& a) {
    const auto run = detail::run_dir(a);
    const auto dir = a.out.empty() ? run : std::filesystem::path(a.out);
    std::filesystem::create_directories(dir);
    detail::LoadedRun r = detail::load_run(run);
    const std::string ckpt_before = detail::read_file(run / "checkpoint.frgn");
    const FrReport fr = run_frgnn(*r.model, r.data.features, r.split, r.data.labels(), r.settings.fr,
                                  fr_rng(r.init_seed, r.split_seed));
    if (detail::read_file(run / "checkpoint.frgn") != ckpt_before) throw StateError("checkpoint changed during fr");
    const HomophilyBuckets hb =
        homophily_buckets(r.data.ops->adjacency, r.data.labels(), fr.preds_before, fr.preds_after, r.split.test);

    Json j = to_json(fr);
    j["dataset"] = r.data.bundle.meta.name;
    j["arch"] = std::string(to_string(r.settings.arch));
    j["init_seed"] = r.init_seed;
    j["split_seed"] = r.split_seed;
    j["buckets"] = to_json(hb);
    j["x_star"] = "x_star.bin";
    j["x_star_shape"] = {fr.x_star.rows(), fr.x_star.cols()};
    write_json(dir / "fr_report.json", j);
    geb_csv(fr.geb_before, fr.geb_after).write(dir / "geb_report.csv");
    buckets_csv(hb).write(dir / "buckets.csv");
    write_matrix_f64(dir / "x_star.bin", fr.x_star);
    std::cout << "fr " << to_string(r.settings.arch) << ": base " << format_fixed(100.0 * fr.base_accuracy, 2)
              << "% -> FR " << format_fixed(100.0 * fr.fr_accuracy, 2) << "%, GEB " << format_real(fr.geb_before.total)
              << " -> " << format_real(fr.geb_after.total) << "\n";
    return kExitOk;
}

inline int cmd_matrix(const CliArgs& a) {
    Config cfg = detail::load_config_arg(a);
    const ExperimentSettings s = read_settings(cfg);
    std::vector<Architecture> models;
    for (const auto& name : cfg.get_strings("matrix.models", std::string(to_string(s.arch))))
        models.push_back(parse_architecture(name));
    auto split_seeds = cfg.get_counts("matrix.split_seeds", "0..9");
    auto init_seeds = cfg.get_counts("matrix.init_seeds", "0..2");
    const bool with_fr = cfg.get_bool("matrix.fr", true);
    if (models.empty() || split_seeds.empty() || init_seeds.empty())
        throw ConfigError("matrix: models, split seeds and init seeds must all be nonempty");
    if (a.seed) {
        for (auto& v : split_seeds) v += *a.seed;
        for (auto& v : init_seeds) v += *a.seed;
    }
    const auto dir = detail::out_dir(a, cfg, "runs/matrix");
    const Dataset d = load_dataset(s);

    std::vector<CellResult> cells;
    for (Architecture arch : models)
        for (std::uint64_t ss : split_seeds)
            for (std::uint64_t is : init_seeds) {
                cells.push_back(run_cell(d, s, arch, ss, is, with_fr));
                const auto& c = cells.back();
                std::cout << to_string(arch) << " split " << ss << " init " << is << ": "
                          << (c.ok ? format_fixed(100.0 * c.base_accuracy, 2) + " -> " +
                                         format_fixed(100.0 * c.fr_accuracy, 2) + ", GEB " + format_real(c.geb_before) +
                                         " -> " + format_real(c.geb_after)
                                   : "failed: " + c.error)
                          << "\n";
            }

    std::vector<ModelAggregate> aggs;
    for (Architecture arch : models) aggs.push_back(aggregate(cells, arch));
    cells_csv(cells).write(dir / "metrics.csv");
    detail::write_file(dir / "table2.md", table2_markdown(d.bundle.meta.name, aggs));
    CsvTable bc({"model", "bucket", "lo", "hi", "nodes", "misclassified_before", "misclassified_after", "fixed", "broken"});
    for (const auto& g : aggs)
        for (std::size_t k = 0; k < kHomophilyBuckets; ++k)
            bc.add({std::string(to_string(g.arch)), std::to_string(k), format_fixed(g.buckets.edges[k], 1),
                    format_fixed(g.buckets.edges[k + 1], 1), std::to_string(g.buckets.nodes[k]),
                    std::to_string(g.buckets.misclassified_before[k]), std::to_string(g.buckets.misclassified_after[k]),
                    std::to_string(g.buckets.fixed[k]), std::to_string(g.buckets.broken[k])});
    bc.write(dir / "buckets.csv");

    Json m;
    m["command"] = "matrix";
    m["dataset"] = d.bundle.meta.name;
    m["split_seeds"] = split_seeds;
    m["init_seeds"] = init_seeds;
    Json ag = Json::array();
    for (const auto& g : aggs) {
        ag.push_back({{"model", std::string(to_string(g.arch))},
                      {"cells", g.cells},
                      {"failed", g.failed},
                      {"base_mean", g.base.mean},
                      {"base_std", g.base.std},
                      {"fr_mean", g.fr.mean},
                      {"fr_std", g.fr.std},
                      {"gap", g.fr.mean - g.base.mean},
                      {"geb_reduced", g.geb_reduced},
                      {"surrogate_ok", g.surrogate_ok},
                      {"top_bucket_fix_share", top_bucket_fix_share(g.buckets)}});
    }
    m["aggregates"] = ag;
    detail::warn_unused(cfg, m);
    m["config"] = detail::config_json(cfg);
    write_json(dir / "manifest.json", m);
    std::cout << table2_markdown(d.bundle.meta.name, aggs);
    return kExitOk;
}

inline int cmd_sample_bias(const CliArgs& a) {
    Config cfg = detail::load_config_arg(a);
    ExperimentSettings s = read_settings(cfg);
    const std::uint64_t seed = detail::seed_of(a, cfg);
    const auto dir = detail::out_dir(a, cfg, "runs/sample_bias");
    const Dataset d = load_dataset(s);
    const SplitMasks split = make_split(d, s, seed);
    write_json(dir / "split.json", to_json(split));

    Json m;
    m["command"] = "sample-bias";
    m["dataset"] = d.bundle.meta.name;
    m["seed"] = seed;
    m["split_sizes"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    if (split.provenance.kind == SplitKind::ppr_biased) {
        ExperimentSettings rs = s;
        rs.split = SplitKind::random;
        const SplitMasks rnd = make_split(d, rs, seed);
        const auto& anchors = split.provenance.class_seeds;
        m["locality"] = {
            {"biased_mean_distance", mean_distance_to_anchor(d.ops->adjacency, d.labels(), split.train, anchors)},
            {"random_mean_distance", mean_distance_to_anchor(d.ops->adjacency, d.labels(), rnd.train, anchors)},
            {"biased_share_within_2_hops", share_within_hops(d.ops->adjacency, d.labels(), split.train, anchors, 2)},
            {"random_share_within_2_hops", share_within_hops(d.ops->adjacency, d.labels(), rnd.train, anchors, 2)}};
    }
    detail::warn_unused(cfg, m);
    m["config"] = detail::config_json(cfg);
    write_json(dir / "manifest.json", m);
    std::cout << "sample-bias " << to_string(split.provenance.kind) << ": " << split.train.size() << " train / "
              << split.val.size() << " val / " << split.test.size() << " test -> " << (dir / "split.json").string()
              << "\n";
    return kExitOk;
}

struct TheorySummary {
    TailCheckReport theorem1;
    std::vector<Theorem2Report> theorem2;
    Lemma2Report lemma2;
    LipschitzReport lemma3;
    bool pass = false;
};

/// Runs every synthetic probe with settings from `cfg` (defaults give the
/// acceptance configuration).
inline TheorySummary run_theory(const Config& cfg, std::uint64_t seed) {
    const Rng root = Rng(seed).split("theory");
    TheorySummary t;
    SyntheticSpec spec = SyntheticSpec::standard(cfg.get_count("theory.classes", 3), cfg.get_count("theory.dim", 4),
                                                 cfg.get_real("theory.sigma", 0.5), cfg.get_count("theory.deg", 8));
    const auto grid = cfg.get_reals("theory.t_grid", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0,1.1,1.2,1.3,1.4,1.5,1.6,1.7,1.8,1.9,2.0");
    t.theorem1 = theorem1_tail_check(spec, grid, cfg.get_count("theory.trials", 100000), root.split("theorem1"));

    const std::size_t specs = cfg.get_count("theorem2.specs", 20);
    const auto fractions = cfg.get_reals("theorem2.fractions", "0.1,0.3,0.5");
    const std::size_t t2_trials = cfg.get_count("theorem2.trials", 20000);
    const double min_diag = cfg.get_real("theorem2.min_diag", 0.7);
    Rng world_rng = root.split("theorem2_worlds");
    bool t2_ok = true;
    for (std::size_t k = 0; k < specs; ++k) {
        auto [w, h] = random_theorem2_world(spec.num_classes, spec.dim, spec.deg, spec.sigma, min_diag, world_rng);
        for (double f : fractions) {
            t.theorem2.push_back(theorem2_check(w, f, h, t2_trials, root.split("theorem2").split(k)));
            t.theorem2.back().world = k;
            t2_ok = t2_ok && t.theorem2.back().all_pass;
        }
    }

    const std::size_t n = cfg.get_count("lemma2.n", 100);
    const std::size_t mm = cfg.get_count("lemma2.m", 10);
    const std::vector<double> centre(spec.dim, 0.0), b(spec.dim, 1.0), y(spec.dim, 1.0);
    t.lemma2 = lemma2_probe(n, mm, b, y, centre, 1.0, cfg.get_count("lemma2.trials", 1000), root.split("lemma2"));

    t.lemma3 = lemma3_random_trials(cfg.get_count("lemma3.trials", 1000), root.split("lemma3"));
    t.pass = t.theorem1.all_pass && t2_ok && t.lemma3.violations == 0;
    return t;
}

inline int cmd_validate_theory(const CliArgs& a) {
    Config cfg = a.config.empty() ? Config{} : detail::load_config_arg(a);
    const std::uint64_t seed = detail::seed_of(a, cfg);
    const auto dir = detail::out_dir(a, cfg, "runs/theory");
    const TheorySummary t = run_theory(cfg, seed);

    tail_csv(t.theorem1).write(dir / "theorem1.csv");
    CsvTable t2({"world", "fraction", "class", "closed_before", "closed_after", "mc_before", "mc_after",
                 "mc_tolerance", "closed_holds", "mc_holds"});
    std::size_t t2_fail = 0;
    for (std::size_t k = 0; k < t.theorem2.size(); ++k)
        for (const auto& c : t.theorem2[k].classes) {
            t2_fail += !(c.closed_holds && c.mc_holds);
            t2.add({std::to_string(t.theorem2[k].world),
                    format_real(t.theorem2[k].fraction), std::to_string(c.cls), format_real(c.closed_before),
                    format_real(c.closed_after), format_real(c.mc_before), format_real(c.mc_after),
                    format_real(c.mc_tolerance), c.closed_holds ? "1" : "0", c.mc_holds ? "1" : "0"});
        }
    t2.write(dir / "theorem2.csv");
    CsvTable l2({"instance", "left", "right_m", "right_m_over_n", "eps", "holds_m", "holds_m_over_n"});
    for (std::size_t k = 0; k < t.lemma2.instances.size(); ++k) {
        const auto& in = t.lemma2.instances[k];
        l2.add({std::to_string(k), format_real(in.left), format_real(in.right_m), format_real(in.right_m_over_n),
                format_real(in.eps), in.holds_m ? "1" : "0", in.holds_m_over_n ? "1" : "0"});
    }
    l2.write(dir / "lemma2.csv");
    CsvTable l3({"trial", "input_distance", "output_distance", "bound"});
    for (std::size_t k = 0; k < t.lemma3.pairs.size(); ++k) {
        const auto& p = t.lemma3.pairs[k];
        l3.add({std::to_string(k), format_real(p.input_distance), format_real(p.output_distance), format_real(p.bound)});
    }
    l3.write(dir / "lemma3.csv");

    Json m;
    m["command"] = "validate-theory";
    m["seed"] = seed;
    m["theorem1"] = to_json(t.theorem1);
    m["theorem2"] = {{"checks", t.theorem2.size()}, {"class_failures", t2_fail}};
    m["lemma2"] = {{"rate_m", t.lemma2.rate_m}, {"rate_m_over_n", t.lemma2.rate_m_over_n}};
    m["lemma3"] = {{"trials", t.lemma3.pairs.size()}, {"violations", t.lemma3.violations}, {"max_ratio", t.lemma3.max_ratio}};
    m["pass"] = t.pass;
    detail::warn_unused(cfg, m);
    m["config"] = detail::config_json(cfg);
    write_json(dir / "theory_summary.json", m);
    std::cout << "validate-theory: theorem1 " << (t.theorem1.all_pass ? "pass" : "FAIL") << ", theorem2 "
              << (t2_fail == 0 ? "pass" : "FAIL") << ", lemma3 " << t.lemma3.violations << " violations, lemma2 rates "
              << format_fixed(t.lemma2.rate_m, 3) << " (m) / " << format_fixed(t.lemma2.rate_m_over_n, 3) << " (m/n)\n";
    return t.pass ? kExitOk : kExitFailure;
}

inline int cmd_export_plots(const CliArgs& a) {
    const auto run = detail::run_dir(a);
    const auto dir = a.out.empty() ? run : std::filesystem::path(a.out);
    std::filesystem::create_directories(dir);
    detail::LoadedRun r = detail::load_run(run);
    const FrReport fr = run_frgnn(*r.model, r.data.features, r.split, r.data.labels(), r.settings.fr,
                                  fr_rng(r.init_seed, r.split_seed));
    const Projection2d before = pca2d(fr.embedding_before);
    const Projection2d after = pca2d(fr.embedding_after);
    std::string csv = embedding_csv(before, r.data.labels(), r.split, "original").str();
    const std::string rest = embedding_csv(after, r.data.labels(), r.split, "reconstructed").str();
    csv += rest.substr(rest.find('\n') + 1);
    detail::write_file(dir / "embedding_2d.csv", csv);
    detail::write_file(dir / "scatter.svg", scatter_svg(before, r.data.labels(), r.split,
                                                        r.data.bundle.meta.name + " embeddings (original features)"));
    detail::write_file(dir / "scatter_fr.svg", scatter_svg(after, r.data.labels(), r.split,
                                                           r.data.bundle.meta.name + " embeddings (reconstructed features)"));
    std::cout << "export-plots: " << fr.embedding_before.rows() << " nodes -> " << (dir / "scatter.svg").string()
              << "\n";
    return kExitOk;
}

/// Parses arguments and dispatches; returns the process exit code.
inline int run_cli(int argc, char** argv) {
    CLI::App app{"frgnn: GNN training, biased sampling and test-time feature reconstruction"};
    app.require_subcommand(1);
    CliArgs args;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"train", "train a base model and write a run directory"},
        {"fr", "apply feature reconstruction to a trained run"},
        {"matrix", "run the model x split-seed x init-seed experiment matrix"},
        {"sample-bias", "emit a biased (or random) split"},
        {"validate-theory", "run the synthetic probes of the theoretical results"},
        {"export-plots", "write 2-D embedding projections and SVG scatter plots"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", args.config, "configuration file");
        sub->add_option("--seed", args.seed, "seed override");
        sub->add_option("--out", args.out, "output directory");
        sub->add_option("--run", args.run, "existing train run directory");
        sub->callback([&args, name = name] { args.command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    try {
        if (args.command == "train") return cmd_train(args);
        if (args.command == "fr") return cmd_fr(args);
        if (args.command == "matrix") return cmd_matrix(args);
        if (args.command == "sample-bias") return cmd_sample_bias(args);
        if (args.command == "validate-theory") return cmd_validate_theory(args);
        if (args.command == "export-plots") return cmd_export_plots(args);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace frgnn
