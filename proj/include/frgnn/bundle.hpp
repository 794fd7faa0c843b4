#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/graph.hpp"
#include "frgnn/params.hpp"
#include "frgnn/splits.hpp"

namespace frgnn {

struct BundleMeta {
    std::string name;
    std::size_t num_nodes = 0;
    std::size_t num_edges_undirected = 0;
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;

    friend bool operator==(const BundleMeta&, const BundleMeta&) = default;
};

/// In-memory graph bundle: the on-disk dataset exchange format.
///
///   meta.json              {name, num_nodes, num_edges_undirected, feature_dim, num_classes}
///   edges.tsv              "u\tv" per undirected edge, u < v, 0-based, sorted, no duplicates
///   features.bin           little-endian f32, row-major num_nodes × feature_dim
///   labels.txt             one class id per line
///   splits/canonical.json  {"train": [...], "val": [...], "test": [...]}
struct GraphBundle {
    BundleMeta meta;
    std::vector<std::pair<NodeId, NodeId>> edges;
    DenseMatrix features; ///< widened to f64
    std::vector<int> labels;
    SplitMasks canonical;

    GraphCsr adjacency() const { return GraphCsr::from_undirected_edges(meta.num_nodes, edges); }

    /// Throws DataError on any violated bundle invariant.
    void validate() const {
        const std::size_t n = meta.num_nodes;
        if (edges.size() != meta.num_edges_undirected)
            throw DataError("bundle: " + std::to_string(edges.size()) + " edges, meta says " +
                            std::to_string(meta.num_edges_undirected));
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const auto [u, v] = edges[k];
            if (u >= v) throw DataError("bundle: edge " + std::to_string(k) + " not u < v (self-loop or reversed)");
            if (v >= n) throw DataError("bundle: edge " + std::to_string(k) + " out of range");
            if (k > 0 && !(edges[k - 1] < edges[k])) throw DataError("bundle: edges not sorted or duplicated");
        }
        if (features.rows() != n || features.cols() != meta.feature_dim)
            throw DataError("bundle: feature matrix shape does not match meta");
        if (labels.size() != n) throw DataError("bundle: label count does not match meta");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= meta.num_classes)
                throw DataError("bundle: label " + std::to_string(y) + " outside [0, num_classes)");
        if (!all_finite(features)) throw DataError("bundle: non-finite feature value");
        canonical.validate(n);
    }
};

namespace detail {

inline std::string read_text(const std::filesystem::path& p) { return read_file(p); }

inline std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline std::uint32_t load_le32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
    return v;
}

inline void store_le32(std::string& out, std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

inline std::size_t parse_count(const std::string& tok, const std::string& where) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(tok, &used);
    } catch (const std::exception&) {
        throw DataError(where + ": '" + tok + "' is not a non-negative integer");
    }
    if (used != tok.size() || tok.empty() || tok[0] == '-') throw DataError(where + ": malformed integer '" + tok + "'");
    return static_cast<std::size_t>(v);
}

} // namespace detail

inline GraphBundle load_bundle(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("bundle directory not found: " + dir.string());
    GraphBundle b;

    try {
        const auto j = nlohmann::json::parse(detail::read_text(dir / "meta.json"));
        b.meta.name = j.at("name").get<std::string>();
        b.meta.num_nodes = j.at("num_nodes").get<std::size_t>();
        b.meta.num_edges_undirected = j.at("num_edges_undirected").get<std::size_t>();
        b.meta.feature_dim = j.at("feature_dim").get<std::size_t>();
        b.meta.num_classes = j.at("num_classes").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("meta.json: ") + e.what());
    }
    const std::size_t n = b.meta.num_nodes;
    const std::size_t f = b.meta.feature_dim;

    {
        std::istringstream in(detail::read_text(dir / "edges.tsv"));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw DataError("edges.tsv:" + std::to_string(lineno) + ": missing tab");
            const std::string where = "edges.tsv:" + std::to_string(lineno);
            const std::size_t u = detail::parse_count(line.substr(0, tab), where);
            const std::size_t v = detail::parse_count(line.substr(tab + 1), where);
            if (u >= n || v >= n) throw DataError(where + ": node id out of range");
            b.edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
    }

    {
        const std::string raw = detail::read_file(dir / "features.bin");
        const std::size_t want = n * f * 4;
        if (raw.size() != want)
            throw DataError("features.bin: " + std::to_string(raw.size()) + " bytes, expected " + std::to_string(want));
        b.features = DenseMatrix(n, f);
        auto out = b.features.values();
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = static_cast<double>(std::bit_cast<float>(detail::load_le32(raw.data() + 4 * k)));
    }

    {
        std::istringstream in(detail::read_text(dir / "labels.txt"));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            b.labels.push_back(static_cast<int>(detail::parse_count(line, "labels.txt:" + std::to_string(lineno))));
        }
    }

    try {
        b.canonical = split_from_json(nlohmann::json::parse(detail::read_text(dir / "splits" / "canonical.json")));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("splits/canonical.json: ") + e.what());
    }
    b.canonical.provenance.kind = SplitKind::canonical;

    b.validate();
    return b;
}

/// Writes `b` in bundle layout (features narrowed to f32). Output is byte-deterministic.
inline void write_bundle(const GraphBundle& b, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    b.validate();
    fs::create_directories(dir / "splits");
    nlohmann::ordered_json meta;
    meta["name"] = b.meta.name;
    meta["num_nodes"] = b.meta.num_nodes;
    meta["num_edges_undirected"] = b.meta.num_edges_undirected;
    meta["feature_dim"] = b.meta.feature_dim;
    meta["num_classes"] = b.meta.num_classes;
    detail::write_file(dir / "meta.json", meta.dump(2) + "\n");

    std::string edges;
    for (auto [u, v] : b.edges) edges += std::to_string(u) + "\t" + std::to_string(v) + "\n";
    detail::write_file(dir / "edges.tsv", edges);

    std::string feats;
    feats.reserve(b.features.size() * 4);
    for (double v : b.features.values())
        detail::store_le32(feats, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    detail::write_file(dir / "features.bin", feats);

    std::string labels;
    for (int y : b.labels) labels += std::to_string(y) + "\n";
    detail::write_file(dir / "labels.txt", labels);

    nlohmann::ordered_json split;
    split["train"] = b.canonical.train;
    split["val"] = b.canonical.val;
    split["test"] = b.canonical.test;
    detail::write_file(dir / "splits" / "canonical.json", split.dump() + "\n");
}

/// Each nonzero row scaled to sum 1; all-zero rows are left as they are.
inline DenseMatrix row_normalize(const DenseMatrix& x) {
    DenseMatrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double s = 0.0;
        for (double v : r) s += v;
        if (s == 0.0) continue;
        for (double& v : r) v /= s;
    }
    return out;
}

} // namespace frgnn
