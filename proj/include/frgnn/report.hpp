#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "frgnn/config.hpp"
#include "frgnn/experiment.hpp"
#include "frgnn/fr.hpp"
#include "frgnn/metrics.hpp"
#include "frgnn/params.hpp"
#include "frgnn/splits.hpp"
#include "frgnn/theory.hpp"

namespace frgnn {

using Json = nlohmann::ordered_json;

/// Rows of already-formatted cells; no quoting is needed for our fields.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) {
        detail::require(row.size() == header_.size(), "CsvTable: row width != header width");
        rows_.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += r[i];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::filesystem::path& p) const { detail::write_file(p, str()); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_json(const std::filesystem::path& p, const Json& j) { detail::write_file(p, j.dump(2) + "\n"); }

inline Json to_json(const HomophilyBuckets& b) {
    Json j;
    j["edges"] = b.edges;
    j["nodes"] = b.nodes;
    j["misclassified_before"] = b.misclassified_before;
    j["misclassified_after"] = b.misclassified_after;
    j["fixed"] = b.fixed;
    j["broken"] = b.broken;
    j["isolated"] = b.isolated;
    return j;
}

inline CsvTable buckets_csv(const HomophilyBuckets& b) {
    CsvTable t({"bucket", "lo", "hi", "nodes", "misclassified_before", "misclassified_after", "fixed", "broken"});
    for (std::size_t k = 0; k < kHomophilyBuckets; ++k)
        t.add({std::to_string(k), format_fixed(b.edges[k], 1), format_fixed(b.edges[k + 1], 1),
               std::to_string(b.nodes[k]), std::to_string(b.misclassified_before[k]),
               std::to_string(b.misclassified_after[k]), std::to_string(b.fixed[k]), std::to_string(b.broken[k])});
    return t;
}

inline CsvTable geb_csv(const GebReport& before, const GebReport& after) {
    CsvTable t({"node_id", "class", "nearest_train_id", "distance", "nearest_train_id_fr", "distance_fr"});
    for (std::size_t k = 0; k < before.nodes.size(); ++k) {
        const auto& b = before.nodes[k];
        const auto& a = after.nodes[k];
        t.add({std::to_string(b.node), std::to_string(b.label), std::to_string(b.nearest_train), format_real(b.distance),
               std::to_string(a.nearest_train), format_real(a.distance)});
    }
    return t;
}

inline Json to_json(const GebReport& g) {
    Json j;
    j["total"] = g.total;
    Json per = Json::object();
    for (const auto& [c, v] : g.per_class) per[std::to_string(c)] = v;
    j["per_class"] = per;
    j["excluded"] = g.excluded;
    return j;
}

inline Json to_json(const FrReport& r) {
    Json j;
    j["base_accuracy"] = r.base_accuracy;
    j["fr_accuracy"] = r.fr_accuracy;
    j["geb_before"] = to_json(r.geb_before);
    j["geb_after"] = to_json(r.geb_after);
    j["geb_reduced"] = r.geb_after.total <= r.geb_before.total;
    Json sur = Json::array();
    for (const auto& s : r.surrogate) {
        Json e;
        e["class"] = s.cls;
        e["argmax"] = s.argmax;
        e["confidence"] = s.confidence;
        e["distance"] = s.distance;
        e["within_eps"] = s.within_eps;
        sur.push_back(e);
    }
    j["surrogate"] = sur;
    j["surrogate_argmax_hits"] = r.surrogate_argmax_hits;
    Json table = Json::array();
    for (std::size_t c = 0; c < r.class_table.rows(); ++c) {
        const auto row = r.class_table.row(c);
        table.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["class_table"] = table;
    j["replaced_count"] = r.replaced.size();
    j["inverse_mlp_loss"] = r.inverse_mlp_loss;
    j["inverse_mlp_curve"] = r.inverse_mlp_curve;
    j["checkpoint_hash_before"] = hex64(r.checkpoint_hash_before);
    j["checkpoint_hash_after"] = hex64(r.checkpoint_hash_after);
    return j;
}

/// f64 little-endian row-major dump (the feature-file layout at double width).
inline void write_matrix_f64(const std::filesystem::path& p, const DenseMatrix& m) {
    std::string out;
    out.reserve(m.size() * 8);
    for (double v : m.values()) detail::put<double>(out, v);
    detail::write_file(p, out);
}

inline std::string split_tag(const SplitMasks& s, std::size_t node) {
    if (std::binary_search(s.train.begin(), s.train.end(), node)) return "train";
    if (std::binary_search(s.val.begin(), s.val.end(), node)) return "val";
    if (std::binary_search(s.test.begin(), s.test.end(), node)) return "test";
    return "other";
}

inline CsvTable embedding_csv(const Projection2d& p, std::span<const int> labels, const SplitMasks& s,
                              const std::string& condition) {
    CsvTable t({"node_id", "x", "y", "label", "split", "condition"});
    for (std::size_t i = 0; i < p.coords.rows(); ++i)
        t.add({std::to_string(i), format_real(p.coords(i, 0)), format_real(p.coords(i, 1)), std::to_string(labels[i]),
               split_tag(s, i), condition});
    return t;
}

/// Scatter plot: colour by class, marker by split (train square, val triangle,
/// test circle, other small dot).
inline std::string scatter_svg(const Projection2d& p, std::span<const int> labels, const SplitMasks& s,
                               const std::string& title) {
    static constexpr std::array<const char*, 10> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const double w = 640, h = 640, pad = 40;
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    for (std::size_t i = 0; i < p.coords.rows(); ++i) {
        const double x = p.coords(i, 0), y = p.coords(i, 1);
        if (i == 0 || x < xmin) xmin = x;
        if (i == 0 || x > xmax) xmax = x;
        if (i == 0 || y < ymin) ymin = y;
        if (i == 0 || y > ymax) ymax = y;
    }
    const double sx = xmax > xmin ? (w - 2 * pad) / (xmax - xmin) : 0.0;
    const double sy = ymax > ymin ? (h - 2 * pad) / (ymax - ymin) : 0.0;
    auto px = [&](double x) { return format_fixed(sx > 0 ? pad + (x - xmin) * sx : w / 2, 2); };
    auto py = [&](double y) { return format_fixed(sy > 0 ? h - pad - (y - ymin) * sy : h / 2, 2); };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n";
    out += "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + title +
           "</text>\n";
    for (std::size_t i = 0; i < p.coords.rows(); ++i) {
        const std::string col = palette[static_cast<std::size_t>(labels[i]) % palette.size()];
        const std::string tag = split_tag(s, i);
        const std::string x = px(p.coords(i, 0)), y = py(p.coords(i, 1));
        const std::string attrs = " class=\"node " + tag + "\" data-node=\"" + std::to_string(i) + "\" fill=\"" + col + "\"";
        if (tag == "train") {
            out += "<rect x=\"" + format_fixed(std::stod(x) - 3.5, 2) + "\" y=\"" + format_fixed(std::stod(y) - 3.5, 2) +
                   "\" width=\"7\" height=\"7\" stroke=\"black\" stroke-width=\"0.6\"" + attrs + "/>\n";
        } else if (tag == "val") {
            const double cx = std::stod(x), cy = std::stod(y);
            out += "<polygon points=\"" + format_fixed(cx, 2) + "," + format_fixed(cy - 4, 2) + " " +
                   format_fixed(cx - 4, 2) + "," + format_fixed(cy + 3, 2) + " " + format_fixed(cx + 4, 2) + "," +
                   format_fixed(cy + 3, 2) + "\"" + attrs + "/>\n";
        } else {
            out += "<circle cx=\"" + x + "\" cy=\"" + y + "\" r=\"" + (tag == "test" ? "3" : "1.5") + "\"" + attrs +
                   " fill-opacity=\"0.7\"/>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

inline Json to_json(const TailCheckReport& r) {
    Json j;
    j["trials"] = r.trials;
    j["all_pass"] = r.all_pass;
    Json pts = Json::array();
    for (const auto& p : r.points) pts.push_back({{"t", p.t}, {"empirical", p.empirical}, {"bound", p.bound}, {"pass", p.pass}});
    j["points"] = pts;
    return j;
}

inline CsvTable tail_csv(const TailCheckReport& r) {
    CsvTable t({"t", "empirical", "std_error", "bound", "pass"});
    for (const auto& p : r.points)
        t.add({format_fixed(p.t, 2), format_real(p.empirical), format_real(p.std_error), format_real(p.bound),
               p.pass ? "1" : "0"});
    return t;
}

inline std::string pm(const MeanStd& m) {
    return format_fixed(100.0 * m.mean, 2) + " ± " + format_fixed(100.0 * m.std, 2);
}

/// Table-shaped Markdown: one row per base model and its FR variant.
inline std::string table2_markdown(const std::string& dataset, std::span<const ModelAggregate> rows) {
    std::string out = "| Model | " + dataset + " | cells | D(X*) <= D(X) |\n|---|---|---|---|\n";
    for (const auto& a : rows) {
        const std::string ok = std::to_string(a.cells - a.failed) + "/" + std::to_string(a.cells);
        out += "| " + display_name(a.arch) + " | " + pm(a.base) + " | " + ok + " | |\n";
        out += "| FR-" + display_name(a.arch) + " | " + pm(a.fr) + " | " + ok + " | " +
               std::to_string(a.geb_reduced) + "/" + std::to_string(a.cells - a.failed) + " |\n";
    }
    return out;
}

inline CsvTable cells_csv(std::span<const CellResult> cells) {
    CsvTable t({"model", "split_seed", "init_seed", "ok", "base_acc", "fr_acc", "geb_before", "geb_after",
                "surrogate_hits", "best_epoch", "inverse_mlp_loss", "error"});
    for (const auto& c : cells) {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        t.add({std::string(to_string(c.arch)), std::to_string(c.split_seed), std::to_string(c.init_seed),
               c.ok ? "1" : "0", format_fixed(c.base_accuracy, 6), format_fixed(c.fr_accuracy, 6),
               format_real(c.geb_before), format_real(c.geb_after), std::to_string(c.surrogate_hits),
               std::to_string(c.best_epoch), format_real(c.inverse_mlp_loss), err});
    }
    return t;
}

} // namespace frgnn
