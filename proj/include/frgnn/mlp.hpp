#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "frgnn/dense.hpp"
#include "frgnn/params.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

/// Inverted-dropout scale mask: each entry is 0 with probability p, else 1/(1-p).
inline DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
    DenseMatrix m(rows, cols, 1.0);
    if (p <= 0.0) return m;
    const double keep = 1.0 / (1.0 - p);
    for (double& v : m.values()) v = rng.uniform() < p ? 0.0 : keep;
    return m;
}

struct MlpLayout {
    std::size_t in = 0;
    std::size_t hidden = 0;
    std::size_t out = 0;
};

/// Two-layer perceptron out = relu(x W1 + b1) W2 + b2, parameters named
/// `<prefix>W1`, `<prefix>b1`, `<prefix>W2`, `<prefix>b2`.
inline ParamSet init_mlp(const MlpLayout& layout, Rng& rng, std::string_view prefix = "") {
    const std::string p(prefix);
    ParamSet params;
    params.add(p + "W1", glorot_uniform(layout.in, layout.hidden, rng));
    params.add(p + "b1", DenseMatrix(1, layout.hidden));
    params.add(p + "W2", glorot_uniform(layout.hidden, layout.out, rng));
    params.add(p + "b2", DenseMatrix(1, layout.out));
    return params;
}

/// Activations kept from a forward pass for the backward pass.
struct MlpTrace {
    DenseMatrix input;
    DenseMatrix pre_hidden;
    DenseMatrix hidden;     ///< relu(pre_hidden)
    DenseMatrix hidden_in;  ///< hidden after dropout (== hidden when no mask)
    std::optional<DenseMatrix> hidden_mask;
    DenseMatrix output;
};

inline MlpTrace mlp_forward_trace(const ParamSet& params, DenseMatrix input, std::string_view prefix = "",
                                  std::optional<DenseMatrix> hidden_mask = std::nullopt) {
    const std::string p(prefix);
    MlpTrace t;
    t.input = std::move(input);
    t.pre_hidden = matmul_sparse_lhs(t.input, params.get(p + "W1"));
    add_row_broadcast(t.pre_hidden, params.get(p + "b1"));
    t.hidden = relu(t.pre_hidden);
    t.hidden_in = hidden_mask ? hadamard(t.hidden, *hidden_mask) : t.hidden;
    t.hidden_mask = std::move(hidden_mask);
    t.output = matmul(t.hidden_in, params.get(p + "W2"));
    add_row_broadcast(t.output, params.get(p + "b2"));
    return t;
}

inline DenseMatrix mlp_forward(const ParamSet& params, const DenseMatrix& input, std::string_view prefix = "") {
    return mlp_forward_trace(params, input, prefix).output;
}

/// Hidden activations relu(x W1 + b1) only.
inline DenseMatrix mlp_hidden(const ParamSet& params, const DenseMatrix& input, std::string_view prefix = "") {
    const std::string p(prefix);
    DenseMatrix h = matmul_sparse_lhs(input, params.get(p + "W1"));
    add_row_broadcast(h, params.get(p + "b1"));
    return relu(h);
}

/// Gradients of the MLP parameters given d loss / d output. Writes into the
/// entries of `grads` named with `prefix`.
inline void mlp_backward(const ParamSet& params, const MlpTrace& t, const DenseMatrix& upstream, ParamSet& grads,
                         std::string_view prefix = "") {
    const std::string p(prefix);
    detail::require(upstream.same_shape(t.output), "mlp_backward: upstream shape != output shape");
    grads.get(p + "W2") = matmul_tn(t.hidden_in, upstream);
    grads.get(p + "b2") = column_sums(upstream);
    DenseMatrix g_hidden = matmul_nt(upstream, params.get(p + "W2"));
    if (t.hidden_mask) g_hidden = hadamard(g_hidden, *t.hidden_mask);
    const DenseMatrix g_pre = relu_backward(g_hidden, t.pre_hidden);
    grads.get(p + "W1") = matmul_tn_sparse_lhs(t.input, g_pre);
    grads.get(p + "b1") = column_sums(g_pre);
}

} // namespace frgnn
