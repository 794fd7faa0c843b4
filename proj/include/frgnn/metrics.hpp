#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/graph.hpp"
#include "frgnn/linalg.hpp"

namespace frgnn {

/// Argmax class per row (lowest class id on ties).
inline std::vector<int> predict_labels(const DenseMatrix& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) out[i] = static_cast<int>(argmax(logits.row(i)));
    return out;
}

/// Fraction of `mask` nodes whose argmax logit equals the label.
inline double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const std::size_t> mask) {
    if (mask.empty()) throw ShapeError("accuracy: empty mask");
    std::size_t hit = 0;
    for (std::size_t i : mask) {
        detail::require(i < logits.rows() && i < labels.size(), "accuracy: mask id out of range");
        if (static_cast<int>(argmax(logits.row(i))) == labels[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(mask.size());
}

// ---------------------------------------------------------------------------
// Graph embedding bias
// ---------------------------------------------------------------------------

struct GebNode {
    std::size_t node = 0;
    int label = 0;
    std::size_t nearest_train = 0;
    double distance = 0.0;
};

struct GebReport {
    double total = 0.0;                  ///< D: sum of per-node nearest same-class distances
    std::map<int, double> per_class;     ///< partial sums of D by class
    std::vector<GebNode> nodes;          ///< one entry per contributing test node, ascending node id
    std::vector<std::size_t> excluded;   ///< test nodes whose class has no training node
};

/// D = Σ_c Σ_{i∈M_c} min_{j∈N_c} ‖H_test[i] − H_train[j]‖₂.
///
/// `test_embedding` and `train_embedding` are full node-by-dim matrices; rows
/// are selected by `test_ids` and `train_ids`. The training embedding must come
/// from the original features so that before/after comparisons share it. Ties
/// in the nearest training node go to the lower node id.
inline GebReport geb(const DenseMatrix& test_embedding, const DenseMatrix& train_embedding,
                     std::span<const int> labels, std::span<const std::size_t> train_ids,
                     std::span<const std::size_t> test_ids) {
    detail::require(test_embedding.cols() == train_embedding.cols(), "geb: embedding widths differ");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t j : train_ids) by_class[labels[j]].push_back(j);
    for (auto& [c, ids] : by_class) std::sort(ids.begin(), ids.end());

    std::vector<std::size_t> tests(test_ids.begin(), test_ids.end());
    std::sort(tests.begin(), tests.end());

    GebReport r;
    for (std::size_t i : tests) {
        const int c = labels[i];
        const auto it = by_class.find(c);
        if (it == by_class.end()) {
            r.excluded.push_back(i);
            continue;
        }
        const auto hi = test_embedding.row(i);
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = it->second.front();
        for (std::size_t j : it->second) {
            const double d = l2_distance(hi, train_embedding.row(j));
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        r.nodes.push_back({i, c, arg, best});
        r.per_class[c] += best;
        r.total += best;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Same-class-neighbor proportion buckets
// ---------------------------------------------------------------------------

inline constexpr std::size_t kHomophilyBuckets = 5;

/// Counts per bucket [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
struct HomophilyBuckets {
    std::array<double, kHomophilyBuckets + 1> edges{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::array<std::size_t, kHomophilyBuckets> nodes{};
    std::array<std::size_t, kHomophilyBuckets> misclassified_before{};
    std::array<std::size_t, kHomophilyBuckets> misclassified_after{};
    std::array<std::size_t, kHomophilyBuckets> fixed{};  ///< wrong before, right after
    std::array<std::size_t, kHomophilyBuckets> broken{}; ///< right before, wrong after
    std::vector<std::size_t> isolated;                   ///< placed in bucket 0

    HomophilyBuckets& operator+=(const HomophilyBuckets& o) {
        for (std::size_t b = 0; b < kHomophilyBuckets; ++b) {
            nodes[b] += o.nodes[b];
            misclassified_before[b] += o.misclassified_before[b];
            misclassified_after[b] += o.misclassified_after[b];
            fixed[b] += o.fixed[b];
            broken[b] += o.broken[b];
        }
        isolated.insert(isolated.end(), o.isolated.begin(), o.isolated.end());
        return *this;
    }
};

/// Bucket of a node with `same` of `deg` neighbors sharing its label.
/// Integer arithmetic keeps 3/5 in [.6,.8) rather than rounding below it.
inline std::size_t homophily_bucket(std::size_t same, std::size_t deg) {
    if (deg == 0) return 0;
    return std::min<std::size_t>(kHomophilyBuckets - 1, (kHomophilyBuckets * same) / deg);
}

inline HomophilyBuckets homophily_buckets(const GraphCsr& graph, std::span<const int> labels,
                                          std::span<const int> preds_before, std::span<const int> preds_after,
                                          std::span<const std::size_t> test_ids) {
    detail::require(preds_before.size() == labels.size() && preds_after.size() == labels.size(),
                    "homophily_buckets: predictions must cover every node");
    HomophilyBuckets hb;
    for (std::size_t i : test_ids) {
        std::size_t deg = 0;
        std::size_t same = 0;
        for (NodeId j : graph.neighbors(i)) {
            if (j == i) continue;
            ++deg;
            if (labels[j] == labels[i]) ++same;
        }
        if (deg == 0) hb.isolated.push_back(i);
        const std::size_t b = homophily_bucket(same, deg);
        const bool ok_before = preds_before[i] == labels[i];
        const bool ok_after = preds_after[i] == labels[i];
        ++hb.nodes[b];
        if (!ok_before) ++hb.misclassified_before[b];
        if (!ok_after) ++hb.misclassified_after[b];
        if (!ok_before && ok_after) ++hb.fixed[b];
        if (ok_before && !ok_after) ++hb.broken[b];
    }
    return hb;
}

// ---------------------------------------------------------------------------
// 2-D principal-component projection
// ---------------------------------------------------------------------------

struct Projection2d {
    DenseMatrix coords;     ///< n × 2
    DenseMatrix components; ///< 2 × d, rows are unit loadings (or zero)
    std::array<double, 2> variance{};
    bool rank_deficient = false; ///< second component zeroed
};

/// Projects rows of `h` onto the top two principal components of the centered
/// covariance. Each component's largest-magnitude loading is made positive.
inline Projection2d pca2d(const DenseMatrix& h) {
    if (h.empty()) throw ShapeError("pca2d: empty embedding");
    const std::size_t n = h.rows();
    const std::size_t d = h.cols();
    DenseMatrix centered = h;
    const DenseMatrix mean = scaled(column_sums(h), 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        auto r = centered.row(i);
        for (std::size_t k = 0; k < d; ++k) r[k] -= mean(0, k);
    }
    DenseMatrix cov = scaled(matmul_tn(centered, centered), 1.0 / static_cast<double>(n));
    const auto pairs = top_eigenpairs_psd(cov, std::min<std::size_t>(2, d));

    Projection2d out;
    out.components = DenseMatrix(2, d);
    for (std::size_t e = 0; e < pairs.size(); ++e) {
        std::vector<double> v = pairs[e].vector;
        std::size_t big = 0;
        for (std::size_t k = 1; k < d; ++k)
            if (std::abs(v[k]) > std::abs(v[big])) big = k;
        if (v[big] < 0.0)
            for (double& x : v) x = -x;
        for (std::size_t k = 0; k < d; ++k) out.components(e, k) = v[k];
        out.variance[e] = pairs[e].value;
    }
    out.rank_deficient = pairs.size() < 2 || pairs[1].value == 0.0;
    out.coords = matmul_nt(centered, out.components);
    return out;
}

} // namespace frgnn
