#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "frgnn/error.hpp"
#include "frgnn/graph.hpp"
#include "frgnn/rng.hpp"
#include "frgnn/splits.hpp"

namespace frgnn {

struct PprScores {
    std::vector<double> scores;   ///< retained mass p
    std::vector<double> residual; ///< unpushed mass r
    std::vector<std::size_t> seeds;
    double alpha = 0.0;
    double eps = 0.0;
    std::size_t pushes = 0;
};

/// Push-based approximate personalized PageRank (teleport probability
/// `alpha`). Unit mass starts spread evenly over `seeds`; a node is pushed
/// while r[u] > eps·deg(u), always taking the smallest active id. Self-loops in
/// `graph` are ignored; a node with no other neighbor keeps all pushed mass.
inline PprScores ppr(const GraphCsr& graph, std::span<const std::size_t> seeds, double alpha, double eps) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("ppr: alpha must lie in (0, 1)");
    if (!(eps > 0.0)) throw ConfigError("ppr: eps must be positive");
    if (seeds.empty()) throw ConfigError("ppr: empty seed set");
    const std::size_t n = graph.num_nodes();
    PprScores out;
    out.scores.assign(n, 0.0);
    out.residual.assign(n, 0.0);
    out.seeds.assign(seeds.begin(), seeds.end());
    out.alpha = alpha;
    out.eps = eps;

    std::vector<std::size_t> deg(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (NodeId j : graph.neighbors(i))
            if (j != i) ++deg[i];

    const double share = 1.0 / static_cast<double>(seeds.size());
    for (std::size_t s : seeds) {
        detail::require(s < n, "ppr: seed out of range");
        out.residual[s] += share;
    }
    auto active = [&](std::size_t u) {
        return out.residual[u] > eps * static_cast<double>(std::max<std::size_t>(deg[u], 1));
    };
    std::set<std::size_t> work;
    for (std::size_t s : seeds)
        if (active(s)) work.insert(s);

    while (!work.empty()) {
        const std::size_t u = *work.begin();
        work.erase(work.begin());
        const double r = out.residual[u];
        out.residual[u] = 0.0;
        ++out.pushes;
        if (deg[u] == 0) {
            out.scores[u] += r;
            continue;
        }
        out.scores[u] += alpha * r;
        const double spread = (1.0 - alpha) * r / static_cast<double>(deg[u]);
        for (NodeId v : graph.neighbors(u)) {
            if (v == u) continue;
            out.residual[v] += spread;
            if (active(v)) work.insert(v);
        }
    }
    return out;
}

namespace detail {

inline std::size_t class_count(std::span<const int> labels) {
    int mx = -1;
    for (int y : labels) {
        if (y < 0) throw DataError("negative label");
        mx = std::max(mx, y);
    }
    return static_cast<std::size_t>(mx + 1);
}

/// Non-test node ids per class, ascending.
inline std::vector<std::vector<std::size_t>> pool_by_class(std::span<const int> labels,
                                                           std::span<const std::size_t> test_ids) {
    std::vector<char> is_test(labels.size(), 0);
    for (std::size_t t : test_ids) {
        require(t < labels.size(), "split: test id out of range");
        is_test[t] = 1;
    }
    std::vector<std::vector<std::size_t>> pools(class_count(labels));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!is_test[i]) pools[static_cast<std::size_t>(labels[i])].push_back(i);
    return pools;
}

inline void draw_val(SplitMasks& s, std::size_t num_nodes, std::size_t val_size, Rng rng) {
    std::vector<char> taken(num_nodes, 0);
    for (std::size_t i : s.train) taken[i] = 1;
    for (std::size_t i : s.test) taken[i] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < num_nodes; ++i)
        if (!taken[i]) rest.push_back(i);
    if (rest.size() < val_size)
        s.provenance.warnings.push_back("validation budget " + std::to_string(val_size) + " reduced to " +
                                        std::to_string(rest.size()));
    rng.shuffle(rest);
    rest.resize(std::min(rest.size(), val_size));
    std::sort(rest.begin(), rest.end());
    s.val = std::move(rest);
}

inline SplitMasks base_split(SplitKind kind, std::span<const std::size_t> test_ids, std::size_t budget,
                             std::size_t val_size, const Rng& rng) {
    SplitMasks s;
    s.test.assign(test_ids.begin(), test_ids.end());
    std::sort(s.test.begin(), s.test.end());
    s.provenance.kind = kind;
    s.provenance.seed = rng.seed();
    s.provenance.per_class_budget = budget;
    s.provenance.val_size = val_size;
    return s;
}

inline void note_short_class(SplitMasks& s, std::size_t c, std::size_t have, std::size_t budget) {
    s.provenance.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(have) +
                                    " non-test nodes; budget " + std::to_string(budget) + " not met");
}

} // namespace detail

/// Training set localized by personalized PageRank: per class, one random
/// non-test seed, then the class's non-test nodes with the highest PPR score
/// from that seed (ties to the lower id). Validation nodes are drawn uniformly
/// from the remaining non-test nodes; the test set is `test_ids` unchanged.
inline SplitMasks biased_split(const GraphCsr& graph, std::span<const int> labels,
                               std::span<const std::size_t> test_ids, std::size_t per_class_budget,
                               std::size_t val_size, double alpha, double eps, const Rng& rng) {
    detail::require(labels.size() == graph.num_nodes(), "biased_split: label count != node count");
    SplitMasks s = detail::base_split(SplitKind::ppr_biased, test_ids, per_class_budget, val_size, rng);
    s.provenance.alpha = alpha;
    s.provenance.eps = eps;
    const auto pools = detail::pool_by_class(labels, test_ids);
    Rng seed_rng = rng.split("class_seed");
    for (std::size_t c = 0; c < pools.size(); ++c) {
        const auto& pool = pools[c];
        if (pool.empty()) {
            detail::note_short_class(s, c, 0, per_class_budget);
            continue;
        }
        const std::size_t seed = pool[seed_rng.below(pool.size())];
        s.provenance.class_seeds.push_back(seed);
        const std::size_t seeds[1] = {seed};
        const PprScores pr = ppr(graph, seeds, alpha, eps);
        std::vector<std::size_t> ranked = pool;
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&](std::size_t a, std::size_t b) { return pr.scores[a] > pr.scores[b]; });
        if (ranked.size() < per_class_budget) detail::note_short_class(s, c, ranked.size(), per_class_budget);
        ranked.resize(std::min(ranked.size(), per_class_budget));
        s.train.insert(s.train.end(), ranked.begin(), ranked.end());
    }
    std::sort(s.train.begin(), s.train.end());
    detail::draw_val(s, graph.num_nodes(), val_size, rng.split("val"));
    return s;
}

/// Uniform per-class training sample with the same budget shape as biased_split.
inline SplitMasks random_split(const GraphCsr& graph, std::span<const int> labels,
                               std::span<const std::size_t> test_ids, std::size_t per_class_budget,
                               std::size_t val_size, const Rng& rng) {
    detail::require(labels.size() == graph.num_nodes(), "random_split: label count != node count");
    SplitMasks s = detail::base_split(SplitKind::random, test_ids, per_class_budget, val_size, rng);
    const auto pools = detail::pool_by_class(labels, test_ids);
    Rng pick = rng.split("class_sample");
    for (std::size_t c = 0; c < pools.size(); ++c) {
        std::vector<std::size_t> pool = pools[c];
        if (pool.size() < per_class_budget) detail::note_short_class(s, c, pool.size(), per_class_budget);
        pick.shuffle(pool);
        pool.resize(std::min(pool.size(), per_class_budget));
        s.train.insert(s.train.end(), pool.begin(), pool.end());
    }
    std::sort(s.train.begin(), s.train.end());
    detail::draw_val(s, graph.num_nodes(), val_size, rng.split("val"));
    return s;
}

/// Mean hop distance from each class's training nodes to a reference node of
/// that class (`anchors[c]`); unreachable pairs are skipped.
inline double mean_distance_to_anchor(const GraphCsr& graph, std::span<const int> labels,
                                      std::span<const std::size_t> train, std::span<const std::size_t> anchors) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t a : anchors) {
        const auto dist = bfs_distances(graph, a);
        for (std::size_t i : train) {
            if (labels[i] != labels[a] || dist[i] == std::numeric_limits<std::size_t>::max()) continue;
            total += static_cast<double>(dist[i]);
            ++count;
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

/// Share of training nodes within `hops` of their class's anchor node.
inline double share_within_hops(const GraphCsr& graph, std::span<const int> labels,
                                std::span<const std::size_t> train, std::span<const std::size_t> anchors,
                                std::size_t hops) {
    std::size_t inside = 0;
    std::size_t count = 0;
    for (std::size_t a : anchors) {
        const auto dist = bfs_distances(graph, a);
        for (std::size_t i : train) {
            if (labels[i] != labels[a]) continue;
            ++count;
            if (dist[i] <= hops) ++inside;
        }
    }
    return count ? static_cast<double>(inside) / static_cast<double>(count) : 0.0;
}

} // namespace frgnn
