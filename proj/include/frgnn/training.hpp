#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "frgnn/error.hpp"
#include "frgnn/loss.hpp"
#include "frgnn/metrics.hpp"
#include "frgnn/models.hpp"
#include "frgnn/optim.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

/// Base-model optimisation settings (full batch).
struct TrainHyper {
    double lr = 0.01;
    double weight_decay = 5e-4;
    std::size_t epochs = 200;
    std::size_t patience = 20;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    TrainedModel model;
    std::vector<EpochRecord> curve;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
};

/// Cross-entropy on `train_ids`, Adam, early stopping on validation accuracy
/// (ties broken by lower validation loss). Parameters of the best epoch are
/// restored. With an empty `val_ids` the final epoch is kept.
inline TrainResult train_model(std::shared_ptr<const GraphOperators> ops, const DenseMatrix& x,
                               std::span<const int> labels, std::span<const std::size_t> train_ids,
                               std::span<const std::size_t> val_ids, const ModelSpec& spec, const TrainHyper& hyper,
                               const Rng& rng) {
    if (!ops) throw StateError("train_model: missing graph operators");
    if (train_ids.empty()) throw ShapeError("train_model: empty train mask");
    detail::require(labels.size() == x.rows(), "train_model: label count != feature rows");

    Rng init_rng = rng.split("init");
    ParamSet params = init_params(spec, init_rng);
    AdamState adam(AdamConfig{hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay}, params);
    const Rng dropout_root = rng.split("dropout");

    ParamSet best = params;
    double best_acc = -1.0;
    double best_loss = 0.0;
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    std::vector<EpochRecord> curve;

    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        Rng drop = dropout_root.split(static_cast<std::uint64_t>(epoch));
        ForwardCache cache;
        const ForwardResult fr = forward(spec, params, *ops, x, ForwardMode{&drop}, &cache);
        const LossAndGrad lg = softmax_cross_entropy(fr.logits, labels, train_ids);
        if (!std::isfinite(lg.loss))
            throw NumericError("train_model: non-finite loss at epoch " + std::to_string(epoch) + " (" +
                               std::string(to_string(spec.arch)) + ")");
        const ParamSet grads = backward(spec, params, *ops, cache, lg.grad);
        adam_step(adam, params, grads);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = lg.loss;
        const DenseMatrix eval_logits = forward(spec, params, *ops, x).logits;
        rec.train_acc = accuracy(eval_logits, labels, train_ids);
        if (!val_ids.empty()) {
            rec.val_acc = accuracy(eval_logits, labels, val_ids);
            rec.val_loss = softmax_cross_entropy(eval_logits, labels, val_ids).loss;
        }
        curve.push_back(rec);

        if (val_ids.empty()) {
            best = params;
            best_epoch = epoch;
            continue;
        }
        if (rec.val_acc > best_acc || (rec.val_acc == best_acc && rec.val_loss < best_loss)) {
            best_acc = rec.val_acc;
            best_loss = rec.val_loss;
            best = params;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= hyper.patience) {
            break;
        }
    }
    return TrainResult{TrainedModel(spec, std::move(best), std::move(ops)), std::move(curve), best_epoch,
                       best_acc < 0.0 ? 0.0 : best_acc};
}

} // namespace frgnn
