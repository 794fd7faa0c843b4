#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"

namespace frgnn {

struct LossAndGrad {
    double loss = 0.0;
    DenseMatrix grad; ///< d loss / d prediction, same shape as the prediction
};

/// ½ Σ (pred − target)² divided by the row count; gradient (pred − target)/rows.
inline LossAndGrad mse_loss(const DenseMatrix& pred, const DenseMatrix& target) {
    detail::require(pred.same_shape(target), "mse_loss: shape mismatch");
    detail::require(pred.rows() > 0, "mse_loss: empty input");
    const double inv_rows = 1.0 / static_cast<double>(pred.rows());
    LossAndGrad out{0.0, DenseMatrix(pred.rows(), pred.cols())};
    auto p = pred.values();
    auto t = target.values();
    auto g = out.grad.values();
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        s += d * d;
        g[i] = d * inv_rows;
    }
    out.loss = 0.5 * s * inv_rows;
    return out;
}

/// Mean over `mask` rows of −log softmax(logits)[label]. Unmasked rows get zero gradient.
inline LossAndGrad softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                                         std::span<const std::size_t> mask) {
    if (mask.empty()) throw ShapeError("softmax_cross_entropy: empty mask");
    detail::require(labels.size() == logits.rows(), "softmax_cross_entropy: label count != rows");
    LossAndGrad out{0.0, DenseMatrix(logits.rows(), logits.cols())};
    const double inv = 1.0 / static_cast<double>(mask.size());
    double total = 0.0;
    for (std::size_t i : mask) {
        detail::require(i < logits.rows(), "softmax_cross_entropy: mask id out of range");
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
            throw ShapeError("softmax_cross_entropy: missing label for node " + std::to_string(i));
        const auto r = logits.row(i);
        double mx = r[0];
        for (double v : r) mx = v > mx ? v : mx;
        double z = 0.0;
        for (double v : r) z += std::exp(v - mx);
        const double log_z = mx + std::log(z);
        total += log_z - r[static_cast<std::size_t>(y)];
        auto g = out.grad.row(i);
        for (std::size_t c = 0; c < r.size(); ++c) g[c] = std::exp(r[c] - log_z) * inv;
        g[static_cast<std::size_t>(y)] -= inv;
    }
    out.loss = total * inv;
    return out;
}

} // namespace frgnn
