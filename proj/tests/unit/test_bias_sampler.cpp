#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "frgnn/frgnn.hpp"
#include "support/synthetic.hpp"

using namespace frgnn;
using frgnn::testing::graph_of;
using frgnn::testing::random_graph;

namespace {

/// Exact personalized PageRank by fixed-point iteration on the dense
/// random-walk matrix (self-loops dropped).
std::vector<double> dense_ppr(const GraphCsr& g, std::size_t seed, double alpha) {
    const std::size_t n = g.num_nodes();
    std::vector<double> p(n, 0.0), next(n);
    for (int it = 0; it < 5000; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        next[seed] += alpha;
        for (std::size_t u = 0; u < n; ++u) {
            std::size_t deg = 0;
            for (std::size_t v = 0; v < n; ++v) deg += (v != u && g.has_edge(u, v));
            if (deg == 0) {
                // a dangling node acts as a self-loop: it keeps everything it receives
                next[u] += (1 - alpha) * p[u];
                continue;
            }
            for (std::size_t v = 0; v < n; ++v)
                if (v != u && g.has_edge(u, v)) next[v] += (1 - alpha) * p[u] / static_cast<double>(deg);
        }
        p.swap(next);
    }
    return p;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST(Ppr, TwoNodeClosedForm) {
    // p0 = α / (1 − (1−α)²), p1 = (1−α)·p0
    const GraphCsr g = graph_of(2, {{0, 1}});
    const std::size_t seed[1] = {0};
    const PprScores r = ppr(g, seed, 0.15, 1e-10);
    EXPECT_NEAR(r.scores[0], 0.15 / (1 - 0.85 * 0.85), 1e-8);
    EXPECT_NEAR(r.scores[1], 0.85 * 0.15 / (1 - 0.85 * 0.85), 1e-8);
    EXPECT_NEAR(0.15 / (1 - 0.85 * 0.85), 0.5405, 1e-4);
}

TEST(Ppr, AgreesWithDenseIterationOnRandomGraphs) {
    Rng rng(3);
    for (int t = 0; t < 5; ++t) {
        const GraphCsr g = random_graph(25, 0.12, rng);
        const std::size_t s = rng.below(25);
        const std::size_t seed[1] = {s};
        const double eps = 1e-9;
        const PprScores r = ppr(g, seed, 0.15, eps);
        const auto exact = dense_ppr(g, s, 0.15);
        // Push error is bounded by the leftover residual mass.
        const double slack = sum(r.residual) + 1e-12;
        for (std::size_t i = 0; i < 25; ++i) {
            EXPECT_LE(r.scores[i], exact[i] + 1e-12);
            EXPECT_NEAR(r.scores[i], exact[i], slack);
        }
    }
}

TEST(Ppr, MassIsConservedAndResidualsAreBelowThreshold) {
    Rng rng(4);
    const GraphCsr g = random_graph(60, 0.05, rng, false);
    const std::vector<std::size_t> seeds{3, 7, 11};
    const double eps = 1e-4;
    const PprScores r = ppr(g, seeds, 0.2, eps);
    EXPECT_NEAR(sum(r.scores) + sum(r.residual), 1.0, 1e-12);
    for (std::size_t u = 0; u < 60; ++u) {
        std::size_t deg = 0;
        for (NodeId v : g.neighbors(u)) deg += v != u;
        EXPECT_LE(r.residual[u], eps * static_cast<double>(std::max<std::size_t>(deg, 1)));
        EXPECT_GE(r.scores[u], 0.0);
    }
}

TEST(Ppr, IsolatedSeedKeepsAllMassAndSelfLoopsAreIgnored) {
    const GraphCsr g = graph_of(3, {{0, 0}, {1, 2}});
    const std::size_t seed[1] = {0};
    const PprScores r = ppr(g, seed, 0.15, 1e-8);
    EXPECT_DOUBLE_EQ(r.scores[0], 1.0);
    EXPECT_EQ(r.scores[1], 0.0);
    const GraphCsr looped = graph_of(2, {{0, 1}, {1, 1}});
    const GraphCsr plain = graph_of(2, {{0, 1}});
    EXPECT_EQ(ppr(looped, seed, 0.15, 1e-8).scores, ppr(plain, seed, 0.15, 1e-8).scores);
}

TEST(Ppr, RejectsBadArguments) {
    const GraphCsr g = graph_of(2, {{0, 1}});
    const std::size_t seed[1] = {0};
    EXPECT_THROW(ppr(g, seed, 0.0, 1e-6), ConfigError);
    EXPECT_THROW(ppr(g, seed, 1.0, 1e-6), ConfigError);
    EXPECT_THROW(ppr(g, seed, 0.15, 0.0), ConfigError);
    EXPECT_THROW(ppr(g, std::span<const std::size_t>{}, 0.15, 1e-6), ConfigError);
}

TEST(Ppr, MassConcentratesInsideTheSeedClique) {
    // Two 8-cliques joined by a single bridge (7, 8).
    std::vector<std::pair<NodeId, NodeId>> edges{{7, 8}};
    for (NodeId base : {0u, 8u})
        for (NodeId i = 0; i < 8; ++i)
            for (NodeId j = i + 1; j < 8; ++j) edges.emplace_back(base + i, base + j);
    const GraphCsr g = graph_of(16, edges);
    const std::size_t seed[1] = {2};
    const PprScores r = ppr(g, seed, 0.15, 1e-8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 8; j < 16; ++j) EXPECT_GT(r.scores[i], r.scores[j]);
}

namespace {

struct SplitWorld {
    GraphBundle bundle;
    GraphCsr graph;
};

const SplitWorld& world() {
    static const SplitWorld w = [] {
        auto spec = frgnn::testing::CitationSpec::toy();
        spec.nodes = 600;
        spec.classes = 4;
        spec.communities = 5;
        spec.train_per_class = 10;
        spec.val = 100;
        spec.test = 200;
        GraphBundle b = frgnn::testing::make_citation_graph(spec, 2);
        GraphCsr g = b.adjacency();
        return SplitWorld{std::move(b), std::move(g)};
    }();
    return w;
}

} // namespace

TEST(BiasedSplit, ShapeAndDisjointness) {
    const auto& w = world();
    const SplitMasks s = biased_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 20, 150, 0.15, 1e-6, Rng(1));
    EXPECT_NO_THROW(s.validate(600));
    EXPECT_EQ(s.test, w.bundle.canonical.test);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.val.size(), 150u);
    std::vector<std::size_t> per_class(4, 0);
    for (std::size_t i : s.train) ++per_class[static_cast<std::size_t>(w.bundle.labels[i])];
    for (std::size_t c : per_class) EXPECT_EQ(c, 20u);
    ASSERT_EQ(s.provenance.class_seeds.size(), 4u);
    for (std::size_t c = 0; c < 4; ++c) {
        const std::size_t seed = s.provenance.class_seeds[c];
        EXPECT_EQ(w.bundle.labels[seed], static_cast<int>(c));
        EXPECT_TRUE(std::binary_search(s.train.begin(), s.train.end(), seed));
    }
    EXPECT_TRUE(s.provenance.warnings.empty());
}

TEST(BiasedSplit, SelectedNodesOutrankTheRestOfTheirClass) {
    const auto& w = world();
    const SplitMasks s = biased_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 15, 50, 0.15, 1e-6, Rng(5));
    std::vector<char> is_test(600, 0), is_train(600, 0);
    for (std::size_t i : s.test) is_test[i] = 1;
    for (std::size_t i : s.train) is_train[i] = 1;
    for (std::size_t c = 0; c < 4; ++c) {
        const std::size_t seed[1] = {s.provenance.class_seeds[c]};
        const PprScores r = ppr(w.graph, seed, 0.15, 1e-6);
        double lowest_in = 1e9, highest_out = -1;
        for (std::size_t i = 0; i < 600; ++i) {
            if (is_test[i] || w.bundle.labels[i] != static_cast<int>(c)) continue;
            if (is_train[i]) lowest_in = std::min(lowest_in, r.scores[i]);
            else highest_out = std::max(highest_out, r.scores[i]);
        }
        EXPECT_GE(lowest_in, highest_out) << "class " << c;
    }
}

TEST(BiasedSplit, DeterministicPerSeed) {
    const auto& w = world();
    auto run = [&](std::uint64_t seed) {
        return biased_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 20, 100, 0.15, 1e-6, Rng(seed));
    };
    EXPECT_EQ(run(3).train, run(3).train);
    EXPECT_EQ(run(3).val, run(3).val);
    EXPECT_NE(run(3).train, run(4).train);
}

TEST(BiasedSplit, IsMoreLocalThanRandomSampling) {
    const auto& w = world();
    double biased = 0, random = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SplitMasks b = biased_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 20, 100, 0.15, 1e-6, Rng(seed));
        const SplitMasks r = random_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 20, 100, Rng(seed));
        const auto& anchors = b.provenance.class_seeds;
        biased += mean_distance_to_anchor(w.graph, w.bundle.labels, b.train, anchors);
        random += mean_distance_to_anchor(w.graph, w.bundle.labels, r.train, anchors);
    }
    EXPECT_LT(biased, 0.75 * random);
}

TEST(BiasedSplit, ShortClassesAreFilledAsFarAsPossibleWithAWarning) {
    // Class 1 has only two non-test nodes.
    const GraphCsr g = graph_of(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}});
    const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 0};
    const std::vector<std::size_t> test{6};
    const SplitMasks s = biased_split(g, labels, test, 3, 10, 0.15, 1e-6, Rng(0));
    EXPECT_EQ(s.train.size(), 5u);
    EXPECT_EQ(s.provenance.warnings.size(), 2u); // short class and reduced validation budget
    EXPECT_EQ(s.val.size(), 2u);
}

TEST(RandomSplit, BudgetAndDeterminism) {
    const auto& w = world();
    const SplitMasks a = random_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 20, 100, Rng(1));
    const SplitMasks b = random_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 20, 100, Rng(1));
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.train.size(), 80u);
    EXPECT_NO_THROW(a.validate(600));
    EXPECT_EQ(a.provenance.kind, SplitKind::random);
}

TEST(Splits, JsonRoundTripAndValidation) {
    const auto& w = world();
    const SplitMasks s = biased_split(w.graph, w.bundle.labels, w.bundle.canonical.test, 5, 10, 0.15, 1e-6, Rng(1));
    const SplitMasks t = split_from_json(nlohmann::json::parse(to_json(s).dump()));
    EXPECT_EQ(t.train, s.train);
    EXPECT_EQ(t.val, s.val);
    EXPECT_EQ(t.test, s.test);
    EXPECT_EQ(t.provenance.class_seeds, s.provenance.class_seeds);
    SplitMasks bad = s;
    bad.val.push_back(bad.train.front());
    std::sort(bad.val.begin(), bad.val.end());
    EXPECT_THROW(bad.validate(600), DataError);
    EXPECT_THROW(split_from_json(nlohmann::json::parse(R"({"train": [1]})")), DataError);
    EXPECT_THROW(parse_split_kind("stratified"), ConfigError);
}

TEST(Locality, HopShareOnAPath) {
    const GraphCsr g = graph_of(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
    const std::vector<int> labels(6, 0);
    const std::vector<std::size_t> train{1, 2, 5}, anchors{0};
    EXPECT_DOUBLE_EQ(mean_distance_to_anchor(g, labels, train, anchors), (1 + 2 + 5) / 3.0);
    EXPECT_DOUBLE_EQ(share_within_hops(g, labels, train, anchors, 2), 2.0 / 3.0);
}
