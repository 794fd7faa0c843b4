#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/graph.hpp"
#include "frgnn/mlp.hpp"
#include "frgnn/params.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

enum class Architecture { gcn, sage_mean, appnp };

inline std::string_view to_string(Architecture a) {
    switch (a) {
    case Architecture::gcn: return "gcn";
    case Architecture::sage_mean: return "sage_mean";
    case Architecture::appnp: return "appnp";
    }
    return "?";
}

inline Architecture parse_architecture(std::string_view s) {
    if (s == "gcn") return Architecture::gcn;
    if (s == "sage_mean" || s == "sage" || s == "graphsage") return Architecture::sage_mean;
    if (s == "appnp") return Architecture::appnp;
    throw ConfigError("unknown architecture '" + std::string(s) + "' (expected gcn | sage_mean | appnp)");
}

struct ModelHyper {
    std::size_t hidden = 64;
    std::size_t appnp_k = 10;
    double appnp_alpha = 0.1;
    double dropout = 0.5; ///< applied to inputs and hidden activations while training
};

/// Everything that fixes forward semantics and parameter shapes.
struct ModelSpec {
    Architecture arch = Architecture::gcn;
    ModelHyper hyper;
    std::size_t in_dim = 0;
    std::size_t num_classes = 0;
};

/// Propagation operators derived once from a raw symmetric adjacency.
struct GraphOperators {
    GraphCsr adjacency;
    GraphCsr sym;    ///< D̃^{-1/2}(A+I)D̃^{-1/2}
    GraphCsr mean;   ///< neighbor mean, self excluded
    GraphCsr mean_t; ///< transpose of `mean`

    static std::shared_ptr<const GraphOperators> build(const GraphCsr& adjacency) {
        auto ops = std::make_shared<GraphOperators>();
        ops->adjacency = adjacency;
        ops->sym = sym_normalize(adjacency);
        ops->mean = mean_normalize(adjacency);
        ops->mean_t = transpose(ops->mean);
        return ops;
    }

    std::size_t num_nodes() const { return adjacency.num_nodes(); }
};

inline ParamSet init_params(const ModelSpec& spec, Rng& rng) {
    const std::size_t f = spec.in_dim;
    const std::size_t h = spec.hyper.hidden;
    const std::size_t c = spec.num_classes;
    ParamSet p;
    switch (spec.arch) {
    case Architecture::gcn:
        p.add("W1", glorot_uniform(f, h, rng));
        p.add("W2", glorot_uniform(h, c, rng));
        p.add("b2", DenseMatrix(1, c));
        break;
    case Architecture::sage_mean:
        // Concatenated [self | neighbor-mean] weight, stored as its two row blocks.
        p.add("W1_self", glorot_uniform(f, h, rng));
        p.add("W1_neigh", glorot_uniform(f, h, rng));
        p.add("b1", DenseMatrix(1, h));
        p.add("W2_self", glorot_uniform(h, c, rng));
        p.add("W2_neigh", glorot_uniform(h, c, rng));
        p.add("b2", DenseMatrix(1, c));
        break;
    case Architecture::appnp: p = init_mlp({f, h, c}, rng); break;
    }
    return p;
}

struct ForwardResult {
    DenseMatrix logits;
    DenseMatrix embedding; ///< pre-classifier representation; empty in training mode
};

/// Dropout control for a training forward pass; default is evaluation mode.
struct ForwardMode {
    Rng* dropout_rng = nullptr;
    bool training() const { return dropout_rng != nullptr; }
};

/// Intermediate activations of one forward pass.
struct ForwardCache {
    bool valid = false;
    Architecture arch = Architecture::gcn;
    DenseMatrix input;                      ///< features after input dropout
    DenseMatrix pre_hidden;                 ///< pre-activation of layer 1
    DenseMatrix hidden_in;                  ///< relu(pre_hidden) after dropout
    std::optional<DenseMatrix> hidden_mask;
    DenseMatrix embedding;                  ///< gcn: Â·hidden_in
    MlpTrace mlp;                           ///< appnp
};

namespace detail {

inline void check_input(const ModelSpec& spec, const GraphOperators& ops, const DenseMatrix& x) {
    require(x.rows() == ops.num_nodes(), "forward: features have " + std::to_string(x.rows()) +
                                             " rows, graph has " + std::to_string(ops.num_nodes()) + " nodes");
    require(x.cols() == spec.in_dim,
            "forward: features have " + std::to_string(x.cols()) + " columns, model expects " +
                std::to_string(spec.in_dim));
}

/// Z_{k+1} = (1-α) Â Z_k + α Z_0, K times.
inline DenseMatrix appnp_propagate(const GraphCsr& sym, const DenseMatrix& z0, std::size_t k, double alpha) {
    DenseMatrix z = z0;
    for (std::size_t step = 0; step < k; ++step) {
        DenseMatrix next = spmm(sym, z);
        auto nv = next.values();
        auto z0v = z0.values();
        for (std::size_t i = 0; i < nv.size(); ++i) nv[i] = (1.0 - alpha) * nv[i] + alpha * z0v[i];
        z = std::move(next);
    }
    return z;
}

} // namespace detail

/// Full-graph forward pass. In training mode dropout masks are drawn from
/// `mode.dropout_rng`; pass `cache` to keep activations for `backward`.
inline ForwardResult forward(const ModelSpec& spec, const ParamSet& params, const GraphOperators& ops,
                             const DenseMatrix& x, ForwardMode mode = {}, ForwardCache* cache = nullptr) {
    detail::check_input(spec, ops, x);
    const double p = mode.training() ? spec.hyper.dropout : 0.0;
    DenseMatrix x_in = p > 0.0 ? hadamard(x, dropout_mask(x.rows(), x.cols(), p, *mode.dropout_rng)) : x;
    std::optional<DenseMatrix> hmask;
    if (p > 0.0) hmask = dropout_mask(x.rows(), spec.hyper.hidden, p, *mode.dropout_rng);

    ForwardResult out;
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.arch = spec.arch;

    switch (spec.arch) {
    case Architecture::gcn: {
        c.pre_hidden = spmm(ops.sym, matmul_sparse_lhs(x_in, params.get("W1")));
        DenseMatrix h = relu(c.pre_hidden);
        c.hidden_in = hmask ? hadamard(h, *hmask) : std::move(h);
        c.embedding = spmm(ops.sym, c.hidden_in);
        out.logits = matmul(c.embedding, params.get("W2"));
        add_row_broadcast(out.logits, params.get("b2"));
        if (!mode.training()) out.embedding = c.embedding;
        break;
    }
    case Architecture::sage_mean: {
        c.pre_hidden = matmul_sparse_lhs(x_in, params.get("W1_self"));
        axpy(c.pre_hidden, 1.0, spmm(ops.mean, matmul_sparse_lhs(x_in, params.get("W1_neigh"))));
        add_row_broadcast(c.pre_hidden, params.get("b1"));
        DenseMatrix h = relu(c.pre_hidden);
        if (!mode.training()) out.embedding = h;
        c.hidden_in = hmask ? hadamard(h, *hmask) : std::move(h);
        out.logits = matmul(c.hidden_in, params.get("W2_self"));
        axpy(out.logits, 1.0, spmm(ops.mean, matmul(c.hidden_in, params.get("W2_neigh"))));
        add_row_broadcast(out.logits, params.get("b2"));
        break;
    }
    case Architecture::appnp: {
        c.mlp = mlp_forward_trace(params, x_in, "", hmask);
        out.logits = detail::appnp_propagate(ops.sym, c.mlp.output, spec.hyper.appnp_k, spec.hyper.appnp_alpha);
        if (!mode.training())
            out.embedding =
                detail::appnp_propagate(ops.sym, c.mlp.hidden, spec.hyper.appnp_k, spec.hyper.appnp_alpha);
        break;
    }
    }
    c.input = std::move(x_in);
    c.hidden_mask = std::move(hmask);
    c.valid = true;
    return out;
}

/// Exact parameter gradients given d loss / d logits and the cache of the
/// forward pass that produced those logits.
inline ParamSet backward(const ModelSpec& spec, const ParamSet& params, const GraphOperators& ops,
                         const ForwardCache& c, const DenseMatrix& upstream) {
    if (!c.valid) throw StateError("backward: no cached forward pass");
    if (c.arch != spec.arch) throw StateError("backward: cache was produced by a different architecture");
    detail::require(upstream.rows() == ops.num_nodes() && upstream.cols() == spec.num_classes,
                    "backward: upstream gradient shape mismatch");
    ParamSet g = params.zeros_like();
    switch (spec.arch) {
    case Architecture::gcn: {
        g.get("W2") = matmul_tn(c.embedding, upstream);
        g.get("b2") = column_sums(upstream);
        // Â is symmetric, so Âᵀ = Â.
        DenseMatrix gh = spmm(ops.sym, matmul_nt(upstream, params.get("W2")));
        if (c.hidden_mask) gh = hadamard(gh, *c.hidden_mask);
        const DenseMatrix gpre = relu_backward(gh, c.pre_hidden);
        g.get("W1") = matmul_tn_sparse_lhs(c.input, spmm(ops.sym, gpre));
        break;
    }
    case Architecture::sage_mean: {
        g.get("W2_self") = matmul_tn(c.hidden_in, upstream);
        g.get("b2") = column_sums(upstream);
        const DenseMatrix g_nb2 = spmm(ops.mean_t, upstream);
        g.get("W2_neigh") = matmul_tn(c.hidden_in, g_nb2);
        DenseMatrix gh = matmul_nt(upstream, params.get("W2_self"));
        axpy(gh, 1.0, matmul_nt(g_nb2, params.get("W2_neigh")));
        if (c.hidden_mask) gh = hadamard(gh, *c.hidden_mask);
        const DenseMatrix gpre = relu_backward(gh, c.pre_hidden);
        g.get("W1_self") = matmul_tn_sparse_lhs(c.input, gpre);
        g.get("b1") = column_sums(gpre);
        g.get("W1_neigh") = matmul_tn_sparse_lhs(c.input, spmm(ops.mean_t, gpre));
        break;
    }
    case Architecture::appnp: {
        const double alpha = spec.hyper.appnp_alpha;
        DenseMatrix gz = upstream;
        DenseMatrix gz0(upstream.rows(), upstream.cols());
        for (std::size_t step = 0; step < spec.hyper.appnp_k; ++step) {
            axpy(gz0, alpha, gz);
            gz = scaled(spmm(ops.sym, gz), 1.0 - alpha);
        }
        axpy(gz0, 1.0, gz);
        mlp_backward(params, c.mlp, gz0, g);
        break;
    }
    }
    return g;
}

/// The model's classifier applied to bare feature rows, with propagation
/// removed (every row treated as an isolated, self-looped node).
inline DenseMatrix classifier_surrogate(const ModelSpec& spec, const ParamSet& params, const DenseMatrix& features) {
    detail::require(features.cols() == spec.in_dim, "classifier_surrogate: feature dimension mismatch");
    switch (spec.arch) {
    case Architecture::gcn: {
        DenseMatrix out = matmul(relu(matmul_sparse_lhs(features, params.get("W1"))), params.get("W2"));
        add_row_broadcast(out, params.get("b2"));
        return out;
    }
    case Architecture::sage_mean: {
        DenseMatrix h = matmul_sparse_lhs(features, params.get("W1_self"));
        add_row_broadcast(h, params.get("b1"));
        DenseMatrix out = matmul(relu(h), params.get("W2_self"));
        add_row_broadcast(out, params.get("b2"));
        return out;
    }
    case Architecture::appnp: return mlp_forward(params, features);
    }
    return {};
}

/// A base model F* after training: parameters are fixed at construction and
/// only exposed read-only.
class TrainedModel {
public:
    TrainedModel(ModelSpec spec, ParamSet params, std::shared_ptr<const GraphOperators> ops)
        : spec_(std::move(spec)), params_(std::move(params)), ops_(std::move(ops)) {
        if (!ops_) throw StateError("TrainedModel: missing graph operators");
    }

    const ModelSpec& spec() const { return spec_; }
    Architecture arch() const { return spec_.arch; }
    const ParamSet& params() const { return params_; }
    const GraphOperators& ops() const { return *ops_; }
    std::shared_ptr<const GraphOperators> shared_ops() const { return ops_; }

    ForwardResult forward(const DenseMatrix& x) const { return frgnn::forward(spec_, params_, *ops_, x); }

    DenseMatrix classifier_surrogate(const DenseMatrix& features) const {
        return frgnn::classifier_surrogate(spec_, params_, features);
    }

    std::string checkpoint_bytes() const { return serialize_checkpoint(params_); }
    std::uint64_t checkpoint_hash() const { return frgnn::checkpoint_hash(params_); }

private:
    ModelSpec spec_;
    ParamSet params_;
    std::shared_ptr<const GraphOperators> ops_;
};

} // namespace frgnn
