#include <gtest/gtest.h>

#include <cmath>

#include "frgnn/frgnn.hpp"
#include "support/synthetic.hpp"

using namespace frgnn;
using frgnn::testing::random_graph;
using frgnn::testing::random_labels;
using frgnn::testing::random_matrix;

TEST(Mlp, ForwardMatchesHandComputation) {
    ParamSet p;
    p.add("W1", DenseMatrix{{1, -1}, {0, 1}});
    p.add("b1", DenseMatrix{{0, 0.5}});
    p.add("W2", DenseMatrix{{2}, {-1}});
    p.add("b2", DenseMatrix{{0.1}});
    // pre = [1, 1.5], relu keeps both; out = 2 - 1.5 + 0.1
    const DenseMatrix out = mlp_forward(p, DenseMatrix{{1, 2}, {-3, 0}});
    EXPECT_NEAR(out(0, 0), 0.6, 1e-15);
    // second row: pre = [-3, 3.5] -> relu [0, 3.5] -> -3.5 + 0.1
    EXPECT_NEAR(out(1, 0), -3.4, 1e-15);
}

TEST(Mlp, DropoutMaskHasInvertedScale) {
    Rng r(1);
    const DenseMatrix m = dropout_mask(200, 50, 0.5, r);
    std::size_t zeros = 0;
    for (double v : m.values()) {
        EXPECT_TRUE(v == 0.0 || v == 2.0);
        zeros += v == 0.0;
    }
    EXPECT_NEAR(static_cast<double>(zeros) / m.size(), 0.5, 0.02);
    EXPECT_EQ(dropout_mask(2, 2, 0.0, r), DenseMatrix(2, 2, 1.0));
}

TEST(Loss, MseValueAndGradient) {
    const DenseMatrix pred{{1, 2}, {3, 4}};
    const LossAndGrad lg = mse_loss(pred, DenseMatrix(2, 2));
    EXPECT_DOUBLE_EQ(lg.loss, 0.5 * 30.0 / 2.0);
    EXPECT_EQ(lg.grad, (DenseMatrix{{0.5, 1}, {1.5, 2}}));
    EXPECT_THROW(mse_loss(pred, DenseMatrix(1, 2)), ShapeError);
}

TEST(Loss, CrossEntropyValueAndGradient) {
    const DenseMatrix logits{{0.0, std::log(3.0)}, {5.0, 5.0}};
    const std::vector<int> labels{1, 0};
    const std::vector<std::size_t> mask{0};
    const LossAndGrad lg = softmax_cross_entropy(logits, labels, mask);
    EXPECT_NEAR(lg.loss, -std::log(0.75), 1e-15);
    EXPECT_NEAR(lg.grad(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(lg.grad(0, 1), -0.25, 1e-15);
    EXPECT_EQ(lg.grad(1, 0), 0.0);
    const std::vector<std::size_t> both{0, 1};
    EXPECT_NEAR(softmax_cross_entropy(logits, labels, both).loss, 0.5 * (-std::log(0.75) + std::log(2.0)), 1e-15);
    EXPECT_THROW(softmax_cross_entropy(logits, labels, std::vector<std::size_t>{}), ShapeError);
    const std::vector<int> missing{1, -1};
    EXPECT_THROW(softmax_cross_entropy(logits, missing, both), ShapeError);
}

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
    ParamSet p;
    p.add("w", DenseMatrix{{1.0, -2.0, 0.5}});
    ParamSet g;
    g.add("w", DenseMatrix{{3.0, -0.01, 1e-3}});
    AdamState s(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0}, p);
    adam_step(s, p, g);
    // With bias correction m̂ = g and v̂ = g², so the step is lr·g/(|g|+eps).
    EXPECT_NEAR(p.get("w")(0, 0), 0.9, 1e-8);
    EXPECT_NEAR(p.get("w")(0, 1), -1.9, 1e-6);
    EXPECT_NEAR(p.get("w")(0, 2), 0.4, 1e-5);
}

TEST(Adam, ThreeStepRecurrenceWithCoupledDecay) {
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.1;
    ParamSet p;
    p.add("w", DenseMatrix{{2.0}});
    AdamState s(AdamConfig{lr, b1, b2, eps, wd}, p);
    const double grads[3] = {0.3, -1.2, 0.7};
    double w = 2.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        ParamSet g;
        g.add("w", DenseMatrix{{grads[t - 1]}});
        adam_step(s, p, g);
        const double gt = grads[t - 1] + wd * w;
        m = b1 * m + (1 - b1) * gt;
        v = b2 * v + (1 - b2) * gt * gt;
        w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        EXPECT_NEAR(p.get("w")(0, 0), w, 1e-14) << "step " << t;
    }
    EXPECT_EQ(s.t, 3u);
}

TEST(Adam, LayoutMismatchThrows) {
    ParamSet p;
    p.add("w", DenseMatrix(1, 2));
    AdamState s(AdamConfig{}, p);
    ParamSet g;
    g.add("w", DenseMatrix(2, 1));
    EXPECT_THROW(adam_step(s, p, g), ShapeError);
}

TEST(Adam, DecreasesAConvexQuadratic) {
    // f(w) = ½ Σ c_k (w_k − t_k)²
    const std::vector<double> c{1, 10, 0.1}, target{3, -1, 2};
    ParamSet p;
    p.add("w", DenseMatrix(1, 3));
    AdamState s(AdamConfig{0.05}, p);
    auto f = [&] {
        double v = 0;
        for (int k = 0; k < 3; ++k) v += 0.5 * c[k] * std::pow(p.get("w")(0, k) - target[k], 2);
        return v;
    };
    const double start = f();
    for (int it = 0; it < 2000; ++it) {
        ParamSet g;
        DenseMatrix gv(1, 3);
        for (int k = 0; k < 3; ++k) gv(0, k) = c[k] * (p.get("w")(0, k) - target[k]);
        g.add("w", gv);
        adam_step(s, p, g);
    }
    EXPECT_LT(f(), 1e-4 * start);
}

TEST(GradCheck, LinearLeastSquaresClosedForm) {
    Rng rng(1);
    const DenseMatrix x = random_matrix(12, 4, rng);
    const DenseMatrix y = random_matrix(12, 3, rng);
    ParamSet p;
    p.add("W", random_matrix(4, 3, rng));
    // ∂/∂W ½‖XW − Y‖²/n = Xᵀ(XW − Y)/n, computed here by explicit loops.
    GradCheckTarget t;
    t.loss = [&](const ParamSet& q) { return mse_loss(matmul(x, q.get("W")), y).loss; };
    t.gradient = [&](const ParamSet& q) {
        const DenseMatrix& w = q.get("W");
        DenseMatrix g(4, 3);
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t c = 0; c < 3; ++c) {
                double r = -y(i, c);
                for (std::size_t k = 0; k < 4; ++k) r += x(i, k) * w(k, c);
                for (std::size_t k = 0; k < 4; ++k) g(k, c) += x(i, k) * r / 12.0;
            }
        ParamSet out;
        out.add("W", g);
        return out;
    };
    const GradCheckReport rep = finite_diff_check(t, p, rng, 0);
    EXPECT_EQ(rep.probes.size(), 12u);
    EXPECT_LT(rep.max_rel_error, 1e-8);
}

TEST(GradCheck, DetectsAWrongGradient) {
    Rng rng(2);
    ParamSet p;
    p.add("w", DenseMatrix{{1.0, 2.0}});
    GradCheckTarget t;
    t.loss = [](const ParamSet& q) { return q.get("w")(0, 0) * q.get("w")(0, 1); };
    t.gradient = [](const ParamSet& q) {
        ParamSet g;
        g.add("w", DenseMatrix{{q.get("w")(0, 1), 0.0}}); // second entry deliberately wrong
        return g;
    };
    const GradCheckReport rep = finite_diff_check(t, p, rng, 0);
    EXPECT_NEAR(rep.probes[0].rel_error, 0.0, 1e-9);
    EXPECT_NEAR(rep.probes[1].rel_error, 1.0, 1e-9);
}

namespace {

struct GnnInstance {
    std::shared_ptr<const GraphOperators> ops;
    DenseMatrix x;
    std::vector<int> labels;
    std::vector<std::size_t> mask;
    ModelSpec spec;
    ParamSet params;
};

GnnInstance gnn_instance(Architecture arch, std::uint64_t seed) {
    Rng rng(seed);
    GnnInstance g;
    const std::size_t n = 10 + rng.below(21);
    g.ops = GraphOperators::build(random_graph(n, 0.12, rng));
    g.x = random_matrix(n, 3 + rng.below(6), rng);
    g.spec = ModelSpec{arch, ModelHyper{}, g.x.cols(), 2 + rng.below(4)};
    g.spec.hyper.hidden = 4 + rng.below(6);
    g.spec.hyper.appnp_k = 1 + rng.below(10);
    g.labels = random_labels(n, g.spec.num_classes, rng);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.bernoulli(0.6)) g.mask.push_back(i);
    if (g.mask.empty()) g.mask.push_back(0);
    g.params = init_params(g.spec, rng);
    // Nonzero biases so their gradients are exercised.
    for (auto& e : g.params)
        if (e.name.front() == 'b')
            for (double& v : e.value.values()) v = rng.uniform(-0.3, 0.3);
    return g;
}

/// Loss under a fixed dropout draw: each evaluation rebuilds the same masks.
GradCheckTarget gnn_target(const GnnInstance& g, std::uint64_t dropout_seed) {
    GradCheckTarget t;
    t.loss = [&g, dropout_seed](const ParamSet& q) {
        Rng d(dropout_seed);
        const ForwardResult fr = forward(g.spec, q, *g.ops, g.x, ForwardMode{&d});
        return softmax_cross_entropy(fr.logits, g.labels, g.mask).loss;
    };
    t.gradient = [&g, dropout_seed](const ParamSet& q) {
        Rng d(dropout_seed);
        ForwardCache cache;
        const ForwardResult fr = forward(g.spec, q, *g.ops, g.x, ForwardMode{&d}, &cache);
        return backward(g.spec, q, *g.ops, cache, softmax_cross_entropy(fr.logits, g.labels, g.mask).grad);
    };
    return t;
}

} // namespace

class GnnGradient : public ::testing::TestWithParam<Architecture> {};

TEST_P(GnnGradient, MatchesCentralDifferencesWithDropout) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GnnInstance g = gnn_instance(GetParam(), 100 + seed);
        Rng probe(seed);
        const GradCheckReport rep = finite_diff_check(gnn_target(g, 7 + seed), g.params, probe, 0);
        EXPECT_LT(rep.max_rel_error, 1e-4) << "seed " << seed;
    }
}

TEST_P(GnnGradient, MatchesCentralDifferencesInEvalMode) {
    GnnInstance g = gnn_instance(GetParam(), 55);
    g.spec.hyper.dropout = 0.0;
    Rng probe(1);
    EXPECT_LT(finite_diff_check(gnn_target(g, 0), g.params, probe, 0).max_rel_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, GnnGradient,
                         ::testing::Values(Architecture::gcn, Architecture::sage_mean, Architecture::appnp),
                         [](const auto& p) { return std::string(to_string(p.param)); });

TEST(GradCheck, InverseMlpWithHiddenDropout) {
    Rng rng(9);
    const DenseMatrix y_hat = softmax_rows(random_matrix(25, 4, rng, -2, 2));
    const DenseMatrix x = random_matrix(25, 7, rng);
    ParamSet p = init_mlp({4, 11, 7}, rng);
    for (double& v : p.get("b1").values()) v = rng.uniform(-0.2, 0.2);
    const DenseMatrix mask = [&] {
        Rng d(3);
        return dropout_mask(25, 11, 0.5, d);
    }();
    GradCheckTarget t;
    t.loss = [&](const ParamSet& q) { return mse_loss(mlp_forward_trace(q, y_hat, "", mask).output, x).loss; };
    t.gradient = [&](const ParamSet& q) {
        const MlpTrace tr = mlp_forward_trace(q, y_hat, "", mask);
        ParamSet g = q.zeros_like();
        mlp_backward(q, tr, mse_loss(tr.output, x).grad, g);
        return g;
    };
    EXPECT_LT(finite_diff_check(t, p, rng, 0).max_rel_error, 1e-4);
}

TEST(Backward, RejectsMissingOrForeignCache) {
    const GnnInstance g = gnn_instance(Architecture::gcn, 1);
    const DenseMatrix up(g.x.rows(), g.spec.num_classes);
    EXPECT_THROW(backward(g.spec, g.params, *g.ops, ForwardCache{}, up), StateError);
    ForwardCache c;
    forward(g.spec, g.params, *g.ops, g.x, {}, &c);
    ModelSpec other = g.spec;
    other.arch = Architecture::appnp;
    EXPECT_THROW(backward(other, g.params, *g.ops, c, up), StateError);
    EXPECT_THROW(backward(g.spec, g.params, *g.ops, c, DenseMatrix(1, 1)), ShapeError);
}

namespace {

struct TrainFixture {
    std::shared_ptr<const GraphOperators> ops;
    DenseMatrix x;
    std::vector<int> labels;
    SplitMasks split;
};

TrainFixture small_task() {
    const GraphBundle b = frgnn::testing::make_citation_graph(frgnn::testing::CitationSpec::toy(), 4);
    return {GraphOperators::build(b.adjacency()), row_normalize(b.features), b.labels, b.canonical};
}

} // namespace

TEST(Training, SameSeedGivesIdenticalCheckpoints) {
    const TrainFixture f = small_task();
    const ModelSpec spec{Architecture::gcn, ModelHyper{}, f.x.cols(), 3};
    TrainHyper h;
    h.epochs = 40;
    const TrainResult a = train_model(f.ops, f.x, f.labels, f.split.train, f.split.val, spec, h, Rng(3));
    const TrainResult b = train_model(f.ops, f.x, f.labels, f.split.train, f.split.val, spec, h, Rng(3));
    const TrainResult c = train_model(f.ops, f.x, f.labels, f.split.train, f.split.val, spec, h, Rng(4));
    EXPECT_EQ(a.model.checkpoint_bytes(), b.model.checkpoint_bytes());
    EXPECT_NE(a.model.checkpoint_bytes(), c.model.checkpoint_bytes());
}

TEST(Training, RestoresTheBestValidationEpoch) {
    const TrainFixture f = small_task();
    for (Architecture arch : {Architecture::gcn, Architecture::sage_mean, Architecture::appnp}) {
        const ModelSpec spec{arch, ModelHyper{}, f.x.cols(), 3};
        TrainHyper h;
        h.epochs = 120;
        h.patience = 10;
        const TrainResult r = train_model(f.ops, f.x, f.labels, f.split.train, f.split.val, spec, h, Rng(1));
        ASSERT_FALSE(r.curve.empty());
        // best = max val accuracy, ties to lower val loss (first such epoch)
        std::size_t best = 0;
        for (std::size_t k = 1; k < r.curve.size(); ++k) {
            const auto& e = r.curve[k];
            const auto& b = r.curve[best];
            if (e.val_acc > b.val_acc || (e.val_acc == b.val_acc && e.val_loss < b.val_loss)) best = k;
        }
        EXPECT_EQ(r.best_epoch, r.curve[best].epoch) << to_string(arch);
        EXPECT_DOUBLE_EQ(accuracy(r.model.forward(f.x).logits, f.labels, f.split.val), r.best_val_acc);
        EXPECT_LE(r.curve.size(), std::min<std::size_t>(h.epochs, r.best_epoch + h.patience));
    }
}

TEST(Training, LearnsTheToyTask) {
    const TrainFixture f = small_task();
    const ModelSpec spec{Architecture::gcn, ModelHyper{}, f.x.cols(), 3};
    const TrainResult r = train_model(f.ops, f.x, f.labels, f.split.train, f.split.val, spec, TrainHyper{}, Rng(0));
    EXPECT_GT(r.curve.front().train_loss, r.curve.back().train_loss);
    EXPECT_GT(accuracy(r.model.forward(f.x).logits, f.labels, f.split.test), 0.6);
}

TEST(Training, EmptyTrainSetThrows) {
    const TrainFixture f = small_task();
    const ModelSpec spec{Architecture::gcn, ModelHyper{}, f.x.cols(), 3};
    EXPECT_THROW(train_model(f.ops, f.x, f.labels, {}, f.split.val, spec, TrainHyper{}, Rng(0)), ShapeError);
}

TEST(Training, NonFiniteFeaturesRaiseNumericError) {
    TrainFixture f = small_task();
    f.x(f.split.train.front(), 0) = std::numeric_limits<double>::quiet_NaN();
    const ModelSpec spec{Architecture::gcn, ModelHyper{}, f.x.cols(), 3};
    TrainHyper h;
    h.epochs = 3;
    EXPECT_THROW(train_model(f.ops, f.x, f.labels, f.split.train, f.split.val, spec, h, Rng(0)), NumericError);
}
