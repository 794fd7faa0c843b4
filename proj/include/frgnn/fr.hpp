#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/loss.hpp"
#include "frgnn/metrics.hpp"
#include "frgnn/mlp.hpp"
#include "frgnn/models.hpp"
#include "frgnn/optim.hpp"
#include "frgnn/rng.hpp"
#include "frgnn/splits.hpp"

namespace frgnn {

/// Inverse-MLP and surrogate-check settings.
struct FrHyper {
    std::size_t hidden = 256;
    double lr = 0.001;
    double weight_decay = 0.0005;
    std::size_t epochs = 50;
    double surrogate_eps = 0.3; ///< ‖softmax(C(x_c*)) − y_c‖₂ threshold
};

/// Ŷ: row-wise softmax of the frozen model's logits for every node.
inline DenseMatrix predict_all(const TrainedModel& model, const DenseMatrix& x) {
    return softmax_rows(model.forward(x).logits);
}

struct InverseMlpFit {
    ParamSet params;
    std::vector<double> losses; ///< loss before each update, then the final loss
    double final_loss = 0.0;
};

/// Trains the 2-layer map Ŷ → X full batch on every node with Adam.
inline InverseMlpFit fit_inverse_mlp(const DenseMatrix& y_hat, const DenseMatrix& x, const FrHyper& hyper,
                                     const Rng& rng) {
    detail::require(y_hat.rows() == x.rows(), "fit_inverse_mlp: prediction and feature row counts differ");
    Rng init = rng.split("inverse_mlp_init");
    InverseMlpFit fit;
    fit.params = init_mlp({y_hat.cols(), hyper.hidden, x.cols()}, init);
    AdamState adam(AdamConfig{hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay}, fit.params);
    ParamSet grads = fit.params.zeros_like();
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        const MlpTrace t = mlp_forward_trace(fit.params, y_hat);
        const LossAndGrad lg = mse_loss(t.output, x);
        if (!std::isfinite(lg.loss))
            throw NumericError("fit_inverse_mlp: non-finite loss at epoch " + std::to_string(epoch + 1));
        fit.losses.push_back(lg.loss);
        mlp_backward(fit.params, t, lg.grad, grads);
        adam_step(adam, fit.params, grads);
    }
    fit.final_loss = mse_loss(mlp_forward(fit.params, y_hat), x).loss;
    if (!std::isfinite(fit.final_loss)) throw NumericError("fit_inverse_mlp: non-finite final loss");
    fit.losses.push_back(fit.final_loss);
    return fit;
}

/// Row c = inverse MLP applied to the one-hot vector e_c.
inline DenseMatrix class_representative_embeddings(const ParamSet& inverse_mlp, std::size_t num_classes) {
    detail::require(inverse_mlp.get("W1").rows() == num_classes,
                    "class_representative_embeddings: MLP input width " +
                        std::to_string(inverse_mlp.get("W1").rows()) + " != class count " +
                        std::to_string(num_classes));
    return mlp_forward(inverse_mlp, DenseMatrix::identity(num_classes));
}

struct ReconstructionResult {
    DenseMatrix x_star;
    std::vector<std::size_t> replaced; ///< ascending
};

/// X* = X with row i replaced by table[labels[i]] for every i in `labeled_ids`.
inline ReconstructionResult reconstruct_features(const DenseMatrix& x, const DenseMatrix& table,
                                                 std::span<const std::size_t> labeled_ids,
                                                 std::span<const int> labels) {
    detail::require(table.cols() == x.cols(), "reconstruct_features: table width != feature width");
    ReconstructionResult r{x, {labeled_ids.begin(), labeled_ids.end()}};
    std::sort(r.replaced.begin(), r.replaced.end());
    for (std::size_t i : r.replaced) {
        detail::require(i < x.rows(), "reconstruct_features: node id out of range");
        if (i >= labels.size() || labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= table.rows())
            throw ShapeError("reconstruct_features: missing label for node " + std::to_string(i));
        const auto src = table.row(static_cast<std::size_t>(labels[i]));
        std::copy(src.begin(), src.end(), r.x_star.row(i).begin());
    }
    return r;
}

struct SurrogateCheck {
    int cls = 0;
    int argmax = 0;
    double confidence = 0.0; ///< softmax probability of `cls`
    double distance = 0.0;   ///< ‖softmax(C(x_c*)) − e_c‖₂
    bool within_eps = false;
};

/// Evaluates the classifier surrogate on every class representative.
inline std::vector<SurrogateCheck> surrogate_checks(const TrainedModel& model, const DenseMatrix& table,
                                                    double eps) {
    const DenseMatrix probs = softmax_rows(model.classifier_surrogate(table));
    std::vector<SurrogateCheck> out;
    for (std::size_t c = 0; c < table.rows(); ++c) {
        SurrogateCheck s;
        s.cls = static_cast<int>(c);
        const auto p = probs.row(c);
        s.argmax = static_cast<int>(argmax(p));
        s.confidence = p[c];
        double d2 = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double diff = p[k] - (k == c ? 1.0 : 0.0);
            d2 += diff * diff;
        }
        s.distance = std::sqrt(d2);
        s.within_eps = s.distance <= eps;
        out.push_back(s);
    }
    return out;
}

struct FrReport {
    double base_accuracy = 0.0;
    double fr_accuracy = 0.0;
    GebReport geb_before;
    GebReport geb_after;
    std::vector<SurrogateCheck> surrogate;
    std::size_t surrogate_argmax_hits = 0;
    DenseMatrix class_table;
    DenseMatrix x_star;
    std::vector<std::size_t> replaced;
    std::vector<int> preds_before;
    std::vector<int> preds_after;
    double inverse_mlp_loss = 0.0;
    std::vector<double> inverse_mlp_curve;
    std::uint64_t checkpoint_hash_before = 0;
    std::uint64_t checkpoint_hash_after = 0;
    DenseMatrix embedding_before; ///< pre-classifier embedding on X
    DenseMatrix embedding_after;  ///< pre-classifier embedding on X*
};

/// The full test-time reconstruction: predict, fit the inverse MLP, build
/// class representatives, replace train ∪ val features, and re-evaluate the
/// frozen model. GEB uses training embeddings computed from the original X.
inline FrReport run_frgnn(const TrainedModel& model, const DenseMatrix& x, const SplitMasks& splits,
                          std::span<const int> labels, const FrHyper& hyper, const Rng& rng) {
    if (splits.test.empty()) throw ShapeError("run_frgnn: empty test set");
    FrReport r;
    r.checkpoint_hash_before = model.checkpoint_hash();

    const ForwardResult before = model.forward(x);
    r.preds_before = predict_labels(before.logits);
    r.base_accuracy = accuracy(before.logits, labels, splits.test);
    const DenseMatrix y_hat = softmax_rows(before.logits);

    const InverseMlpFit fit = fit_inverse_mlp(y_hat, x, hyper, rng);
    r.inverse_mlp_loss = fit.final_loss;
    r.inverse_mlp_curve = fit.losses;
    r.class_table = class_representative_embeddings(fit.params, model.spec().num_classes);
    r.surrogate = surrogate_checks(model, r.class_table, hyper.surrogate_eps);
    for (const auto& s : r.surrogate)
        if (s.argmax == s.cls) ++r.surrogate_argmax_hits;

    ReconstructionResult rec = reconstruct_features(x, r.class_table, splits.labeled(), labels);
    const ForwardResult after = model.forward(rec.x_star);
    r.preds_after = predict_labels(after.logits);
    r.fr_accuracy = accuracy(after.logits, labels, splits.test);

    r.geb_before = geb(before.embedding, before.embedding, labels, splits.train, splits.test);
    r.geb_after = geb(after.embedding, before.embedding, labels, splits.train, splits.test);

    r.x_star = std::move(rec.x_star);
    r.replaced = std::move(rec.replaced);
    r.embedding_before = before.embedding;
    r.embedding_after = after.embedding;
    r.checkpoint_hash_after = model.checkpoint_hash();
    return r;
}

} // namespace frgnn
