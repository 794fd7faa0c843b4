#include <gtest/gtest.h>

#include <cmath>

#include "frgnn/frgnn.hpp"
#include "support/synthetic.hpp"

using namespace frgnn;
using frgnn::testing::random_matrix;

namespace {

DenseMatrix one_hot_rows(std::span<const int> labels, std::size_t classes) {
    DenseMatrix m(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) m(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return m;
}

struct Trained {
    GraphBundle bundle;
    DenseMatrix x;
    TrainResult result;
};

const Trained& toy_run() {
    static const Trained t = [] {
        GraphBundle b = frgnn::testing::make_citation_graph(frgnn::testing::CitationSpec::toy(), 21);
        DenseMatrix x = row_normalize(b.features);
        const auto ops = GraphOperators::build(b.adjacency());
        const ModelSpec spec{Architecture::gcn, ModelHyper{}, x.cols(), b.meta.num_classes};
        TrainResult r = train_model(ops, x, b.labels, b.canonical.train, b.canonical.val, spec, TrainHyper{}, Rng(2));
        return Trained{std::move(b), std::move(x), std::move(r)};
    }();
    return t;
}

} // namespace

TEST(InverseMlp, LossDecreasesAndIsDeterministic) {
    Rng rng(1);
    const DenseMatrix y = softmax_rows(random_matrix(40, 3, rng, -3, 3));
    const DenseMatrix x = random_matrix(40, 6, rng);
    const FrHyper h;
    const InverseMlpFit a = fit_inverse_mlp(y, x, h, Rng(5));
    const InverseMlpFit b = fit_inverse_mlp(y, x, h, Rng(5));
    ASSERT_EQ(a.losses.size(), h.epochs + 1);
    EXPECT_LT(a.final_loss, a.losses.front());
    EXPECT_EQ(a.final_loss, a.losses.back());
    EXPECT_EQ(a.params, b.params);
    EXPECT_NE(a.params, fit_inverse_mlp(y, x, h, Rng(6)).params);
    EXPECT_THROW(fit_inverse_mlp(y, DenseMatrix(39, 6), h, Rng(0)), ShapeError);
}

TEST(InverseMlp, ConstantTargetsGiveConstantRepresentatives) {
    Rng rng(2);
    const std::vector<int> labels = frgnn::testing::random_labels(60, 4, rng);
    const DenseMatrix y = one_hot_rows(labels, 4);
    const std::vector<double> v{0.3, -0.2, 0.7};
    DenseMatrix x(60, 3);
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t k = 0; k < 3; ++k) x(i, k) = v[k];
    FrHyper h;
    h.epochs = 1500;
    h.lr = 0.01;
    h.weight_decay = 0.0;
    const DenseMatrix table = class_representative_embeddings(fit_inverse_mlp(y, x, h, Rng(1)).params, 4);
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(table(c, k), v[k], 1e-3);
}

TEST(InverseMlp, RecoversClassPrototypesFromOneHotPredictions) {
    Rng rng(3);
    const std::vector<int> labels = frgnn::testing::random_labels(90, 3, rng);
    const DenseMatrix proto = random_matrix(3, 5, rng);
    DenseMatrix x(90, 5);
    for (std::size_t i = 0; i < 90; ++i)
        for (std::size_t k = 0; k < 5; ++k) x(i, k) = proto(static_cast<std::size_t>(labels[i]), k);
    FrHyper h;
    h.epochs = 2000;
    h.lr = 0.01;
    h.weight_decay = 0.0;
    const DenseMatrix table = class_representative_embeddings(fit_inverse_mlp(one_hot_rows(labels, 3), x, h, Rng(1)).params, 3);
    EXPECT_LT(max_abs_diff(table, proto), 1e-3);
}

TEST(InverseMlp, RepresentativeTableNeedsMatchingClassCount) {
    Rng rng(4);
    const ParamSet p = init_mlp({3, 4, 2}, rng);
    EXPECT_EQ(class_representative_embeddings(p, 3).rows(), 3u);
    EXPECT_THROW(class_representative_embeddings(p, 4), ShapeError);
}

TEST(Reconstruct, ReplacesExactlyTheLabeledRows) {
    const DenseMatrix x{{1, 1}, {2, 2}, {3, 3}, {4, 4}};
    const DenseMatrix table{{10, 11}, {20, 21}};
    const std::vector<int> labels{1, 0, 1, 0};
    const std::vector<std::size_t> ids{2, 0};
    const ReconstructionResult r = reconstruct_features(x, table, ids, labels);
    EXPECT_EQ(r.x_star, (DenseMatrix{{20, 21}, {2, 2}, {20, 21}, {4, 4}}));
    EXPECT_EQ(r.replaced, (std::vector<std::size_t>{0, 2}));
    const std::vector<int> missing{-1, 0, 1, 0};
    EXPECT_THROW(reconstruct_features(x, table, ids, missing), ShapeError);
    EXPECT_THROW(reconstruct_features(x, DenseMatrix(2, 3), ids, labels), ShapeError);
}

TEST(Surrogate, DistanceAndArgmaxMatchManualSoftmax) {
    const Trained& t = toy_run();
    Rng rng(5);
    const DenseMatrix table = random_matrix(3, t.x.cols(), rng, 0, 0.2);
    const auto checks = surrogate_checks(t.result.model, table, 0.3);
    const DenseMatrix logits = t.result.model.classifier_surrogate(table);
    ASSERT_EQ(checks.size(), 3u);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto r = logits.row(c);
        double z = 0;
        for (double v : r) z += std::exp(v);
        double d2 = 0;
        for (std::size_t k = 0; k < 3; ++k) d2 += std::pow(std::exp(r[k]) / z - (k == c), 2);
        EXPECT_NEAR(checks[c].distance, std::sqrt(d2), 1e-12);
        EXPECT_NEAR(checks[c].confidence, std::exp(r[c]) / z, 1e-12);
        EXPECT_EQ(checks[c].argmax, static_cast<int>(argmax(r)));
        EXPECT_EQ(checks[c].within_eps, checks[c].distance <= 0.3);
    }
}

TEST(FrPipeline, LeavesTheModelAndTestFeaturesUntouched) {
    const Trained& t = toy_run();
    const std::string before = t.result.model.checkpoint_bytes();
    const FrReport r = run_frgnn(t.result.model, t.x, t.bundle.canonical, t.bundle.labels, FrHyper{}, Rng(1));
    EXPECT_EQ(t.result.model.checkpoint_bytes(), before);
    EXPECT_EQ(r.checkpoint_hash_before, r.checkpoint_hash_after);
    EXPECT_EQ(r.replaced, t.bundle.canonical.labeled());
    std::vector<char> replaced(t.x.rows(), 0);
    for (std::size_t i : r.replaced) replaced[i] = 1;
    for (std::size_t i = 0; i < t.x.rows(); ++i) {
        const auto a = r.x_star.row(i);
        if (replaced[i]) {
            const auto rep = r.class_table.row(static_cast<std::size_t>(t.bundle.labels[i]));
            EXPECT_TRUE(std::equal(a.begin(), a.end(), rep.begin())) << i;
        } else {
            const auto b = t.x.row(i);
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << i;
        }
    }
}

TEST(FrPipeline, ReportAgreesWithIndependentRecomputation) {
    const Trained& t = toy_run();
    const auto& split = t.bundle.canonical;
    const FrReport r = run_frgnn(t.result.model, t.x, split, t.bundle.labels, FrHyper{}, Rng(1));
    const ForwardResult before = t.result.model.forward(t.x);
    const ForwardResult after = t.result.model.forward(r.x_star);
    EXPECT_DOUBLE_EQ(r.base_accuracy, accuracy(before.logits, t.bundle.labels, split.test));
    EXPECT_DOUBLE_EQ(r.fr_accuracy, accuracy(after.logits, t.bundle.labels, split.test));
    EXPECT_EQ(r.preds_after, predict_labels(after.logits));
    // The after-GEB compares reconstructed test embeddings with original-feature training embeddings.
    EXPECT_DOUBLE_EQ(r.geb_after.total, geb(after.embedding, before.embedding, t.bundle.labels, split.train, split.test).total);
    EXPECT_DOUBLE_EQ(r.geb_before.total, geb(before.embedding, before.embedding, t.bundle.labels, split.train, split.test).total);
    EXPECT_EQ(r.inverse_mlp_curve.size(), FrHyper{}.epochs + 1);
    std::size_t hits = 0;
    for (const auto& s : r.surrogate) hits += s.argmax == s.cls;
    EXPECT_EQ(r.surrogate_argmax_hits, hits);
}

TEST(FrPipeline, SameSeedSameReport) {
    const Trained& t = toy_run();
    const FrReport a = run_frgnn(t.result.model, t.x, t.bundle.canonical, t.bundle.labels, FrHyper{}, Rng(8));
    const FrReport b = run_frgnn(t.result.model, t.x, t.bundle.canonical, t.bundle.labels, FrHyper{}, Rng(8));
    EXPECT_EQ(a.x_star, b.x_star);
    EXPECT_EQ(a.fr_accuracy, b.fr_accuracy);
    EXPECT_EQ(a.geb_after.total, b.geb_after.total);
    const FrReport c = run_frgnn(t.result.model, t.x, t.bundle.canonical, t.bundle.labels, FrHyper{}, Rng(9));
    EXPECT_NE(a.class_table, c.class_table);
}

TEST(FrPipeline, IdentityTableReproducesBaseModel) {
    // With an empty labeled set nothing is replaced, so FR equals the base model.
    const Trained& t = toy_run();
    SplitMasks s;
    s.test = t.bundle.canonical.test;
    const FrReport r = run_frgnn(t.result.model, t.x, s, t.bundle.labels, FrHyper{}, Rng(1));
    EXPECT_EQ(r.x_star, t.x);
    EXPECT_EQ(r.fr_accuracy, r.base_accuracy);
}

TEST(FrPipeline, EmptyTestSetThrows) {
    const Trained& t = toy_run();
    SplitMasks s = t.bundle.canonical;
    s.test.clear();
    EXPECT_THROW(run_frgnn(t.result.model, t.x, s, t.bundle.labels, FrHyper{}, Rng(1)), ShapeError);
}
