#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "frgnn/bundle.hpp"
#include "frgnn/config.hpp"
#include "frgnn/fr.hpp"
#include "frgnn/metrics.hpp"
#include "frgnn/models.hpp"
#include "frgnn/sampler.hpp"
#include "frgnn/splits.hpp"
#include "frgnn/training.hpp"

namespace frgnn {

/// Everything a run needs besides seeds, read from a Config.
struct ExperimentSettings {
    std::filesystem::path bundle;
    bool row_normalize = true;
    Architecture arch = Architecture::gcn;
    ModelHyper model;
    TrainHyper train;
    FrHyper fr;
    SplitKind split = SplitKind::ppr_biased;
    std::size_t per_class = 20;
    std::size_t val_size = 500;
    double ppr_alpha = 0.15;
    double ppr_eps = 1e-6;
};

inline ExperimentSettings read_settings(const Config& cfg) {
    ExperimentSettings s;
    s.bundle = cfg.get_path("data.bundle", "");
    s.row_normalize = cfg.get_bool("data.row_normalize", true);
    s.arch = parse_architecture(cfg.get_string("model.arch", "gcn"));
    s.model.hidden = cfg.get_count("model.hidden", s.model.hidden);
    s.model.dropout = cfg.get_real("model.dropout", s.model.dropout);
    s.model.appnp_k = cfg.get_count("model.appnp_k", s.model.appnp_k);
    s.model.appnp_alpha = cfg.get_real("model.appnp_alpha", s.model.appnp_alpha);
    s.train.lr = cfg.get_real("train.lr", s.train.lr);
    s.train.weight_decay = cfg.get_real("train.weight_decay", s.train.weight_decay);
    s.train.epochs = cfg.get_count("train.epochs", s.train.epochs);
    s.train.patience = cfg.get_count("train.patience", s.train.patience);
    s.fr.hidden = cfg.get_count("mlp.hidden", s.fr.hidden);
    s.fr.lr = cfg.get_real("mlp.lr", s.fr.lr);
    s.fr.weight_decay = cfg.get_real("mlp.wd", s.fr.weight_decay);
    s.fr.epochs = cfg.get_count("mlp.epochs", s.fr.epochs);
    s.fr.surrogate_eps = cfg.get_real("fr.surrogate_eps", s.fr.surrogate_eps);
    s.split = parse_split_kind(cfg.get_string("split.kind", "biased"));
    s.per_class = cfg.get_count("split.per_class", s.per_class);
    s.val_size = cfg.get_count("split.val_size", s.val_size);
    s.ppr_alpha = cfg.get_real("split.alpha", s.ppr_alpha);
    s.ppr_eps = cfg.get_real("split.eps", s.ppr_eps);
    if (s.model.hidden == 0 || s.fr.hidden == 0) throw ConfigError("hidden widths must be positive");
    if (!(s.model.dropout >= 0.0 && s.model.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
    if (s.train.epochs == 0) throw ConfigError("train.epochs must be positive");
    return s;
}

/// A loaded bundle with its model-ready features and propagation operators.
struct Dataset {
    GraphBundle bundle;
    DenseMatrix features;
    std::shared_ptr<const GraphOperators> ops;

    std::size_t num_classes() const { return bundle.meta.num_classes; }
    std::span<const int> labels() const { return bundle.labels; }
};

inline Dataset prepare_dataset(GraphBundle bundle, bool normalize) {
    Dataset d;
    d.features = normalize ? row_normalize(bundle.features) : bundle.features;
    d.ops = GraphOperators::build(bundle.adjacency());
    d.bundle = std::move(bundle);
    return d;
}

inline Dataset load_dataset(const ExperimentSettings& s) {
    if (s.bundle.empty()) throw ConfigError("data.bundle is not set");
    return prepare_dataset(load_bundle(s.bundle), s.row_normalize);
}

inline SplitMasks make_split(const Dataset& d, const ExperimentSettings& s, std::uint64_t split_seed) {
    const Rng rng = Rng(split_seed).split("split");
    switch (s.split) {
    case SplitKind::canonical: return d.bundle.canonical;
    case SplitKind::random:
        return random_split(d.ops->adjacency, d.labels(), d.bundle.canonical.test, s.per_class, s.val_size, rng);
    case SplitKind::ppr_biased:
        return biased_split(d.ops->adjacency, d.labels(), d.bundle.canonical.test, s.per_class, s.val_size,
                            s.ppr_alpha, s.ppr_eps, rng);
    }
    return d.bundle.canonical;
}

inline ModelSpec model_spec(const Dataset& d, const ExperimentSettings& s, Architecture arch) {
    return ModelSpec{arch, s.model, d.features.cols(), d.num_classes()};
}

inline Rng train_rng(std::uint64_t init_seed) { return Rng(init_seed).split("train"); }
inline Rng fr_rng(std::uint64_t init_seed, std::uint64_t split_seed) {
    return Rng(init_seed).split("fr").split(split_seed);
}

struct CellResult {
    Architecture arch = Architecture::gcn;
    std::uint64_t split_seed = 0;
    std::uint64_t init_seed = 0;
    bool ok = false;
    std::string error;
    double base_accuracy = 0.0;
    double fr_accuracy = 0.0;
    double geb_before = 0.0;
    double geb_after = 0.0;
    std::size_t surrogate_hits = 0;
    std::size_t num_classes = 0;
    std::size_t best_epoch = 0;
    double inverse_mlp_loss = 0.0;
    HomophilyBuckets buckets;
};

/// Split, train and (optionally) reconstruct for one matrix cell. Failures are
/// captured in the result instead of thrown.
inline CellResult run_cell(const Dataset& d, const ExperimentSettings& s, Architecture arch,
                           std::uint64_t split_seed, std::uint64_t init_seed, bool with_fr = true) {
    CellResult r;
    r.arch = arch;
    r.split_seed = split_seed;
    r.init_seed = init_seed;
    r.num_classes = d.num_classes();
    try {
        const SplitMasks split = make_split(d, s, split_seed);
        TrainResult tr = train_model(d.ops, d.features, d.labels(), split.train, split.val, model_spec(d, s, arch),
                                     s.train, train_rng(init_seed));
        r.best_epoch = tr.best_epoch;
        if (with_fr) {
            const FrReport fr = run_frgnn(tr.model, d.features, split, d.labels(), s.fr, fr_rng(init_seed, split_seed));
            r.base_accuracy = fr.base_accuracy;
            r.fr_accuracy = fr.fr_accuracy;
            r.geb_before = fr.geb_before.total;
            r.geb_after = fr.geb_after.total;
            r.surrogate_hits = fr.surrogate_argmax_hits;
            r.inverse_mlp_loss = fr.inverse_mlp_loss;
            r.buckets = homophily_buckets(d.ops->adjacency, d.labels(), fr.preds_before, fr.preds_after, split.test);
        } else {
            r.base_accuracy = accuracy(tr.model.forward(d.features).logits, d.labels(), split.test);
        }
        r.ok = true;
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; ///< sample standard deviation (n−1); 0 for a single value
    std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> v) {
    MeanStd m;
    m.n = v.size();
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return m;
}

struct ModelAggregate {
    Architecture arch = Architecture::gcn;
    MeanStd base;
    MeanStd fr;
    std::size_t cells = 0;
    std::size_t failed = 0;
    std::size_t geb_reduced = 0;   ///< cells with D(X*) ≤ D(X)
    std::size_t surrogate_ok = 0;  ///< cells with argmax C(x_c*) = c for ≥ C−1 classes
    HomophilyBuckets buckets;
};

/// Aggregates the successful cells of one architecture.
inline ModelAggregate aggregate(std::span<const CellResult> cells, Architecture arch) {
    ModelAggregate a;
    a.arch = arch;
    std::vector<double> base, fr;
    for (const auto& c : cells) {
        if (c.arch != arch) continue;
        ++a.cells;
        if (!c.ok) {
            ++a.failed;
            continue;
        }
        base.push_back(c.base_accuracy);
        fr.push_back(c.fr_accuracy);
        if (c.geb_after <= c.geb_before) ++a.geb_reduced;
        if (c.surrogate_hits + 1 >= c.num_classes) ++a.surrogate_ok;
        a.buckets += c.buckets;
    }
    a.base = mean_std(base);
    a.fr = mean_std(fr);
    return a;
}

/// Share of "fixed" nodes in the two highest homophily buckets.
inline double top_bucket_fix_share(const HomophilyBuckets& b) {
    std::size_t total = 0;
    for (std::size_t f : b.fixed) total += f;
    if (total == 0) return 0.0;
    const std::size_t top = b.fixed[kHomophilyBuckets - 1] + b.fixed[kHomophilyBuckets - 2];
    return static_cast<double>(top) / static_cast<double>(total);
}

inline std::string display_name(Architecture a) {
    switch (a) {
    case Architecture::gcn: return "GCN";
    case Architecture::sage_mean: return "GraphSAGE";
    case Architecture::appnp: return "APPNP";
    }
    return "?";
}

} // namespace frgnn
