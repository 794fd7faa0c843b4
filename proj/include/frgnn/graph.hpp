#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"

namespace frgnn {

using NodeId = std::uint32_t;

/// Immutable sparse adjacency in compressed-row form.
///
/// Invariants (checked on construction): row_ptr nondecreasing and ending at
/// nnz; col_idx in range and strictly increasing within a row; structurally
/// symmetric. Values may be asymmetric (e.g. the mean-aggregation operator).
class GraphCsr {
public:
    GraphCsr() = default;

    GraphCsr(std::size_t num_nodes, std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx,
             std::vector<double> values)
        : num_nodes_(num_nodes), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
          values_(std::move(values)) {
        validate();
    }

    /// Unit-weight symmetric graph from an undirected edge list. Each pair is
    /// inserted in both directions; duplicates collapse. Self-loops are kept.
    static GraphCsr from_undirected_edges(std::size_t num_nodes,
                                          std::span<const std::pair<NodeId, NodeId>> edges) {
        std::vector<std::pair<NodeId, NodeId>> directed;
        directed.reserve(edges.size() * 2);
        for (auto [u, v] : edges) {
            if (u >= num_nodes || v >= num_nodes)
                throw StructuralError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                      ") out of range for " + std::to_string(num_nodes) + " nodes");
            directed.emplace_back(u, v);
            if (u != v) directed.emplace_back(v, u);
        }
        std::sort(directed.begin(), directed.end());
        directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
        std::vector<std::size_t> row_ptr(num_nodes + 1, 0);
        std::vector<NodeId> cols;
        cols.reserve(directed.size());
        for (auto [u, v] : directed) {
            ++row_ptr[u + 1];
            cols.push_back(v);
        }
        for (std::size_t i = 0; i < num_nodes; ++i) row_ptr[i + 1] += row_ptr[i];
        std::vector<double> vals(cols.size(), 1.0);
        return GraphCsr(num_nodes, std::move(row_ptr), std::move(cols), std::move(vals));
    }

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t nnz() const { return col_idx_.size(); }

    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const NodeId> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    std::span<const NodeId> neighbors(std::size_t i) const {
        return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> weights(std::size_t i) const {
        return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::size_t degree(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

    /// Position of (i, j) in the value array, or npos.
    std::size_t find(std::size_t i, std::size_t j) const {
        const auto nb = neighbors(i);
        const auto it = std::lower_bound(nb.begin(), nb.end(), static_cast<NodeId>(j));
        if (it == nb.end() || *it != j) return npos;
        return row_ptr_[i] + static_cast<std::size_t>(it - nb.begin());
    }
    bool has_edge(std::size_t i, std::size_t j) const { return find(i, j) != npos; }

    /// Materialize as a dense matrix (tests and small oracles only).
    DenseMatrix to_dense() const {
        DenseMatrix d(num_nodes_, num_nodes_);
        for (std::size_t i = 0; i < num_nodes_; ++i)
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) d(i, col_idx_[p]) = values_[p];
        return d;
    }

    friend bool operator==(const GraphCsr&, const GraphCsr&) = default;

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

private:
    void validate() const {
        if (row_ptr_.size() != num_nodes_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size())
            throw StructuralError("GraphCsr: row_ptr inconsistent with nnz");
        if (values_.size() != col_idx_.size()) throw StructuralError("GraphCsr: values/col_idx length mismatch");
        for (std::size_t i = 0; i < num_nodes_; ++i) {
            if (row_ptr_[i] > row_ptr_[i + 1]) throw StructuralError("GraphCsr: row_ptr decreasing");
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                if (col_idx_[p] >= num_nodes_) throw StructuralError("GraphCsr: column out of range");
                if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1])
                    throw StructuralError("GraphCsr: columns not strictly increasing in row " +
                                          std::to_string(i));
            }
        }
        for (std::size_t i = 0; i < num_nodes_; ++i)
            for (NodeId j : neighbors(i))
                if (!has_edge(j, i))
                    throw StructuralError("GraphCsr: edge (" + std::to_string(i) + "," + std::to_string(j) +
                                          ") has no reverse");
    }

    std::size_t num_nodes_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<NodeId> col_idx_;
    std::vector<double> values_;
};

/// D̃^{-1/2}(A+I)D̃^{-1/2}. A missing self-loop is added with weight 1; an
/// existing one is kept at weight 1. Output is exactly symmetric.
inline GraphCsr sym_normalize(const GraphCsr& adj) {
    const std::size_t n = adj.num_nodes();
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<NodeId> cols;
    cols.reserve(adj.nnz() + n);
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        bool self_done = false;
        for (NodeId j : adj.neighbors(i)) {
            if (!self_done && j >= i) {
                cols.push_back(static_cast<NodeId>(i));
                self_done = true;
                if (j == i) continue;
            }
            cols.push_back(j);
        }
        if (!self_done) cols.push_back(static_cast<NodeId>(i));
        row_ptr[i + 1] = cols.size();
        deg[i] = static_cast<double>(row_ptr[i + 1] - row_ptr[i]);
    }
    std::vector<double> vals(cols.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) vals[p] = 1.0 / std::sqrt(deg[i] * deg[cols[p]]);
    return GraphCsr(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

/// Row-stochastic neighbor-mean operator (no self-loops): value 1/deg(i) on
/// every stored neighbor. Isolated rows stay empty, so their mean is zero.
inline GraphCsr mean_normalize(const GraphCsr& adj) {
    const std::size_t n = adj.num_nodes();
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<NodeId> cols;
    cols.reserve(adj.nnz());
    for (std::size_t i = 0; i < n; ++i) {
        for (NodeId j : adj.neighbors(i))
            if (j != i) cols.push_back(j);
        row_ptr[i + 1] = cols.size();
    }
    std::vector<double> vals(cols.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(row_ptr[i + 1] - row_ptr[i]);
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) vals[p] = 1.0 / d;
    }
    return GraphCsr(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

inline GraphCsr transpose(const GraphCsr& g) {
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> row_ptr(n + 1, 0);
    for (NodeId j : g.col_idx()) ++row_ptr[j + 1];
    for (std::size_t i = 0; i < n; ++i) row_ptr[i + 1] += row_ptr[i];
    std::vector<NodeId> cols(g.nnz());
    std::vector<double> vals(g.nnz());
    std::vector<std::size_t> fill(row_ptr.begin(), row_ptr.end() - 1);
    // Rows are visited in ascending order, so each transposed row comes out sorted.
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = g.neighbors(i);
        const auto w = g.weights(i);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const std::size_t at = fill[nb[k]]++;
            cols[at] = static_cast<NodeId>(i);
            vals[at] = w[k];
        }
    }
    return GraphCsr(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

/// out[i] = Σ_j a_ij · dense[j], summed in ascending column order.
inline DenseMatrix spmm(const GraphCsr& adj, const DenseMatrix& dense) {
    detail::require(adj.num_nodes() == dense.rows(), "spmm: graph has " + std::to_string(adj.num_nodes()) +
                                                         " nodes, dense has " + std::to_string(dense.rows()) +
                                                         " rows");
    DenseMatrix out(dense.rows(), dense.cols());
    const std::size_t c = dense.cols();
    for (std::size_t i = 0; i < adj.num_nodes(); ++i) {
        double* o = out.data() + i * c;
        const auto nb = adj.neighbors(i);
        const auto w = adj.weights(i);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const double* src = dense.data() + static_cast<std::size_t>(nb[k]) * c;
            const double a = w[k];
            for (std::size_t j = 0; j < c; ++j) o[j] += a * src[j];
        }
    }
    return out;
}

/// Hop distances from `source`; unreachable nodes get SIZE_MAX.
inline std::vector<std::size_t> bfs_distances(const GraphCsr& g, std::size_t source) {
    std::vector<std::size_t> dist(g.num_nodes(), std::numeric_limits<std::size_t>::max());
    std::queue<std::size_t> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (NodeId v : g.neighbors(u)) {
            if (dist[v] == std::numeric_limits<std::size_t>::max()) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    return dist;
}

/// Relabel nodes: new id of old node i is perm[i].
inline GraphCsr permute(const GraphCsr& g, std::span<const std::size_t> perm) {
    const std::size_t n = g.num_nodes();
    std::vector<std::vector<std::pair<NodeId, double>>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = g.neighbors(i);
        const auto w = g.weights(i);
        for (std::size_t k = 0; k < nb.size(); ++k)
            rows[perm[i]].emplace_back(static_cast<NodeId>(perm[nb[k]]), w[k]);
    }
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> vals;
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(rows[i].begin(), rows[i].end());
        for (auto [j, w] : rows[i]) {
            cols.push_back(j);
            vals.push_back(w);
        }
        row_ptr[i + 1] = cols.size();
    }
    return GraphCsr(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

} // namespace frgnn
