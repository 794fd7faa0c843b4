#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/linalg.hpp"
#include "frgnn/params.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

/// Per-node synthetic world: class-c features are uniform on the box
/// μ_c ± σ, a node has `deg` neighbors whose labels are drawn i.i.d. from row
/// c of `neighbor_law`, and every edge (self included) has weight 1/(deg+1).
struct SyntheticSpec {
    std::size_t num_classes = 3;
    std::size_t dim = 4;
    DenseMatrix means;        ///< C × l
    double sigma = 0.5;       ///< box half-width
    DenseMatrix neighbor_law; ///< C × C, rows on the simplex
    std::size_t deg = 8;

    double edge_weight() const { return 1.0 / static_cast<double>(deg + 1); }
    double gamma() const { return edge_weight(); }

    void validate() const {
        if (num_classes == 0 || dim == 0) throw ConfigError("synthetic spec: empty class or feature dimension");
        if (means.rows() != num_classes || means.cols() != dim) throw ConfigError("synthetic spec: means shape");
        if (neighbor_law.rows() != num_classes || neighbor_law.cols() != num_classes)
            throw ConfigError("synthetic spec: neighbor law shape");
        if (!(sigma >= 0.0)) throw ConfigError("synthetic spec: sigma must be non-negative");
        for (std::size_t c = 0; c < num_classes; ++c) {
            double s = 0.0;
            for (double p : neighbor_law.row(c)) {
                if (p < 0.0) throw ConfigError("synthetic spec: negative neighbor-law entry");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-12) throw ConfigError("synthetic spec: neighbor-law row does not sum to 1");
        }
    }

    /// Default probe world: class means ±0.25 per coordinate (coordinate k is
    /// positive for class k mod C), homophilous law with 0.8 on the diagonal.
    static SyntheticSpec standard(std::size_t c = 3, std::size_t l = 4, double sigma = 0.5, std::size_t deg = 8) {
        SyntheticSpec s;
        s.num_classes = c;
        s.dim = l;
        s.sigma = sigma;
        s.deg = deg;
        s.means = DenseMatrix(c, l);
        for (std::size_t a = 0; a < c; ++a)
            for (std::size_t k = 0; k < l; ++k) s.means(a, k) = (k % c == a) ? 0.25 : -0.25;
        s.neighbor_law = DenseMatrix(c, c);
        for (std::size_t a = 0; a < c; ++a)
            for (std::size_t b = 0; b < c; ++b)
                s.neighbor_law(a, b) = c == 1 ? 1.0 : (a == b ? 0.8 : 0.2 / static_cast<double>(c - 1));
        return s;
    }
};

namespace detail {

inline void add_box_sample(std::span<double> acc, std::span<const double> centre, double sigma, double weight,
                           Rng& rng) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += weight * (centre[k] + rng.uniform(-sigma, sigma));
}

} // namespace detail

/// h = Σ_{j∈N∪{i}} a·x_j for one freshly sampled class-c neighbourhood. The
/// self feature is drawn from class c; neighbour labels from the law's row c.
inline std::vector<double> sample_node_embedding(const SyntheticSpec& spec, std::size_t c, Rng& rng) {
    const double a = spec.edge_weight();
    std::vector<double> h(spec.dim, 0.0);
    detail::add_box_sample(h, spec.means.row(c), spec.sigma, a, rng);
    for (std::size_t j = 0; j < spec.deg; ++j) {
        const std::size_t cj = rng.categorical(spec.neighbor_law.row(c));
        detail::add_box_sample(h, spec.means.row(cj), spec.sigma, a, rng);
    }
    return h;
}

/// Closed-form E[h] for class c: a·μ_c + deg·a·Σ_{c'} D_c[c']·μ_{c'}.
inline std::vector<double> embedding_expectation(const SyntheticSpec& spec, std::size_t c) {
    const double a = spec.edge_weight();
    std::vector<double> e(spec.dim, 0.0);
    for (std::size_t k = 0; k < spec.dim; ++k) {
        double mix = 0.0;
        for (std::size_t b = 0; b < spec.num_classes; ++b) mix += spec.neighbor_law(c, b) * spec.means(b, k);
        e[k] = a * spec.means(c, k) + static_cast<double>(spec.deg) * a * mix;
    }
    return e;
}

/// Right-hand side of the tail bound, evaluated as printed:
/// 2l·exp(−t² / (2σ²·l·deg·γ²)).
inline double theorem1_bound(const SyntheticSpec& spec, double t) {
    const double l = static_cast<double>(spec.dim);
    const double g = spec.gamma();
    const double denom = 2.0 * spec.sigma * spec.sigma * l * static_cast<double>(spec.deg) * g * g;
    if (denom == 0.0) return t > 0.0 ? 0.0 : 2.0 * l;
    return 2.0 * l * std::exp(-t * t / denom);
}

struct TailPoint {
    double t = 0.0;
    double empirical = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct TailCheckReport {
    std::vector<TailPoint> points;
    std::size_t trials = 0;
    bool all_pass = true;
};

inline std::vector<double> default_t_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 20; ++k) g.push_back(0.1 * k);
    return g;
}

/// Empirical P(‖h − e_c‖ ≥ t) over `trials` draws (class = trial mod C),
/// against the printed bound. A point passes iff empirical ≤ min(bound, 1) + 3·SE.
inline TailCheckReport theorem1_tail_check(const SyntheticSpec& spec, std::span<const double> t_grid,
                                           std::size_t trials, const Rng& rng) {
    spec.validate();
    std::vector<std::vector<double>> expect;
    for (std::size_t c = 0; c < spec.num_classes; ++c) expect.push_back(embedding_expectation(spec, c));
    std::vector<double> dist(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        Rng r = rng.split(static_cast<std::uint64_t>(t));
        const std::size_t c = t % spec.num_classes;
        dist[t] = l2_distance(sample_node_embedding(spec, c, r), expect[c]);
    }
    TailCheckReport rep;
    rep.trials = trials;
    for (double t : t_grid) {
        TailPoint p;
        p.t = t;
        std::size_t hits = 0;
        for (double d : dist)
            if (d >= t) ++hits;
        const double n = static_cast<double>(std::max<std::size_t>(trials, 1));
        p.empirical = static_cast<double>(hits) / n;
        p.std_error = std::sqrt(p.empirical * (1.0 - p.empirical) / n);
        p.bound = theorem1_bound(spec, t);
        p.pass = p.empirical <= std::min(p.bound, 1.0) + 3.0 * p.std_error;
        rep.all_pass = rep.all_pass && p.pass;
        rep.points.push_back(p);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Mean-replacement probe
// ---------------------------------------------------------------------------

struct Lemma2Instance {
    double left = 0.0;           ///< ‖μ(A)−y‖ − ‖μ(B)−y‖
    double right_m = 0.0;        ///< m·‖μ(A)−y‖ − ε
    double right_m_over_n = 0.0; ///< (m/n)·‖μ(A)−y‖ − ε
    double eps = 0.0;            ///< premise residual ‖Σ_{kept} a_i − (n−m)μ(A)‖
    bool holds_m = false;
    bool holds_m_over_n = false;
};

struct Lemma2Report {
    std::vector<Lemma2Instance> instances;
    double rate_m = 0.0;
    double rate_m_over_n = 0.0;
};

/// Draws A = {a_1..a_n} i.i.d. from the box centre ± spread, replaces m random
/// elements with b to form B, and records both sides of the inequality under
/// the literal factor m and under m/n. ε is set to the premise residual, the
/// smallest value for which the premise holds.
inline Lemma2Report lemma2_probe(std::size_t n, std::size_t m, std::span<const double> b, std::span<const double> y,
                                 std::span<const double> centre, double spread, std::size_t trials, const Rng& rng) {
    if (m < 1 || m > n) throw ConfigError("lemma2_probe: need 1 <= m <= n");
    detail::require(b.size() == y.size() && b.size() == centre.size(), "lemma2_probe: dimension mismatch");
    const std::size_t d = b.size();
    Lemma2Report rep;
    std::size_t ok_m = 0;
    std::size_t ok_mn = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng r = rng.split(static_cast<std::uint64_t>(t));
        std::vector<std::vector<double>> a(n, std::vector<double>(d));
        for (auto& v : a)
            for (std::size_t k = 0; k < d; ++k) v[k] = centre[k] + r.uniform(-spread, spread);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        r.shuffle(idx);
        std::vector<char> replaced(n, 0);
        for (std::size_t i = 0; i < m; ++i) replaced[idx[i]] = 1;

        std::vector<double> mu_a(d, 0.0);
        std::vector<double> mu_b(d, 0.0);
        std::vector<double> kept(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) {
                mu_a[k] += a[i][k];
                mu_b[k] += replaced[i] ? b[k] : a[i][k];
                if (!replaced[i]) kept[k] += a[i][k];
            }
        for (std::size_t k = 0; k < d; ++k) {
            mu_a[k] /= static_cast<double>(n);
            mu_b[k] /= static_cast<double>(n);
            kept[k] -= static_cast<double>(n - m) * mu_a[k];
        }
        Lemma2Instance in;
        const double da = l2_distance(mu_a, y);
        in.left = da - l2_distance(mu_b, y);
        in.eps = l2_norm(kept);
        in.right_m = static_cast<double>(m) * da - in.eps;
        in.right_m_over_n = static_cast<double>(m) / static_cast<double>(n) * da - in.eps;
        in.holds_m = in.left >= in.right_m;
        in.holds_m_over_n = in.left >= in.right_m_over_n;
        ok_m += in.holds_m;
        ok_mn += in.holds_m_over_n;
        rep.instances.push_back(in);
    }
    if (trials) {
        rep.rate_m = static_cast<double>(ok_m) / static_cast<double>(trials);
        rep.rate_m_over_n = static_cast<double>(ok_mn) / static_cast<double>(trials);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Replacement moves the embedding expectation towards the representative
// ---------------------------------------------------------------------------

/// Closed-form expectation when a fraction f of every class's nodes carries
/// h*_c instead of a box sample: class mixtures (1−f)μ_c + f·h*_c are used for
/// the self term and for each neighbour class.
inline std::vector<double> replaced_expectation(const SyntheticSpec& spec, std::size_t c, double fraction,
                                                const DenseMatrix& h_star) {
    const double a = spec.edge_weight();
    std::vector<double> e(spec.dim, 0.0);
    auto mixed = [&](std::size_t b, std::size_t k) {
        return (1.0 - fraction) * spec.means(b, k) + fraction * h_star(b, k);
    };
    for (std::size_t k = 0; k < spec.dim; ++k) {
        double mix = 0.0;
        for (std::size_t b = 0; b < spec.num_classes; ++b) mix += spec.neighbor_law(c, b) * mixed(b, k);
        e[k] = a * mixed(c, k) + static_cast<double>(spec.deg) * a * mix;
    }
    return e;
}

/// Draw of h under replacement: each of the deg+1 contributing nodes is a
/// replaced labeled node with probability `fraction`.
inline std::vector<double> sample_replaced_embedding(const SyntheticSpec& spec, std::size_t c, double fraction,
                                                     const DenseMatrix& h_star, Rng& rng) {
    const double a = spec.edge_weight();
    std::vector<double> h(spec.dim, 0.0);
    auto add = [&](std::size_t b) {
        if (rng.uniform() < fraction) {
            const auto hs = h_star.row(b);
            for (std::size_t k = 0; k < spec.dim; ++k) h[k] += a * hs[k];
        } else {
            detail::add_box_sample(h, spec.means.row(b), spec.sigma, a, rng);
        }
    };
    add(c);
    for (std::size_t j = 0; j < spec.deg; ++j) add(rng.categorical(spec.neighbor_law.row(c)));
    return h;
}

struct Theorem2Class {
    std::size_t cls = 0;
    double closed_before = 0.0; ///< ‖e_c − h*_c‖
    double closed_after = 0.0;  ///< ‖e*_c − h*_c‖
    double mc_before = 0.0;
    double mc_after = 0.0;
    double mc_tolerance = 0.0;  ///< 3 × (SE norm of both Monte-Carlo means)
    bool closed_holds = false;
    bool mc_holds = false;
};

struct Theorem2Report {
    std::size_t world = 0;
    double fraction = 0.0;
    std::size_t trials = 0;
    std::vector<Theorem2Class> classes;
    bool all_pass = true;
};

namespace detail {

struct MeanEstimate {
    std::vector<double> mean;
    double se_norm = 0.0; ///< ‖per-coordinate standard errors‖₂
};

template <typename Draw>
MeanEstimate mc_mean(std::size_t dim, std::size_t trials, Draw&& draw) {
    std::vector<double> s(dim, 0.0);
    std::vector<double> s2(dim, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::vector<double> h = draw(t);
        for (std::size_t k = 0; k < dim; ++k) {
            s[k] += h[k];
            s2[k] += h[k] * h[k];
        }
    }
    MeanEstimate out;
    out.mean.resize(dim);
    const double n = static_cast<double>(trials);
    double se2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        out.mean[k] = s[k] / n;
        const double var = std::max(0.0, s2[k] / n - out.mean[k] * out.mean[k]) * n / std::max(n - 1.0, 1.0);
        se2 += var / n;
    }
    out.se_norm = std::sqrt(se2);
    return out;
}

} // namespace detail

/// Checks ‖e*_c − h*_c‖ ≤ ‖e_c − h*_c‖ per class in closed form and by Monte
/// Carlo (the estimate passes unless it is violated beyond its error bar).
inline Theorem2Report theorem2_check(const SyntheticSpec& spec, double fraction, const DenseMatrix& h_star,
                                     std::size_t trials, const Rng& rng) {
    spec.validate();
    detail::require(h_star.rows() == spec.num_classes && h_star.cols() == spec.dim,
                    "theorem2_check: h_star must be C × l");
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("theorem2_check: fraction outside [0, 1]");
    Theorem2Report rep;
    rep.fraction = fraction;
    rep.trials = trials;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        Theorem2Class out;
        out.cls = c;
        const auto hs = h_star.row(c);
        out.closed_before = l2_distance(embedding_expectation(spec, c), hs);
        out.closed_after = l2_distance(replaced_expectation(spec, c, fraction, h_star), hs);
        out.closed_holds = out.closed_after <= out.closed_before * (1.0 + 1e-12) + 1e-15;

        const Rng base = rng.split(static_cast<std::uint64_t>(c));
        const Rng orig_rng = base.split("original");
        const Rng repl_rng = base.split("replaced");
        const auto before = detail::mc_mean(spec.dim, trials, [&](std::size_t t) {
            Rng r = orig_rng.split(static_cast<std::uint64_t>(t));
            return sample_node_embedding(spec, c, r);
        });
        const auto after = detail::mc_mean(spec.dim, trials, [&](std::size_t t) {
            Rng r = repl_rng.split(static_cast<std::uint64_t>(t));
            return sample_replaced_embedding(spec, c, fraction, h_star, r);
        });
        out.mc_before = l2_distance(before.mean, hs);
        out.mc_after = l2_distance(after.mean, hs);
        out.mc_tolerance = 3.0 * (before.se_norm + after.se_norm);
        out.mc_holds = out.mc_after <= out.mc_before + out.mc_tolerance;
        rep.all_pass = rep.all_pass && out.closed_holds && out.mc_holds;
        rep.classes.push_back(out);
    }
    return rep;
}

/// Randomised world for the replacement check: means uniform in ±0.25, a
/// neighbour law with diagonal ≥ `min_diag` (rest spread at random), and
/// h*_c = μ_c + δ_c with ‖δ_c‖ uniform in [1, 1.5].
inline std::pair<SyntheticSpec, DenseMatrix> random_theorem2_world(std::size_t c, std::size_t l, std::size_t deg,
                                                                   double sigma, double min_diag, Rng& rng) {
    SyntheticSpec s;
    s.num_classes = c;
    s.dim = l;
    s.sigma = sigma;
    s.deg = deg;
    s.means = DenseMatrix(c, l);
    for (double& v : s.means.values()) v = rng.uniform(-0.25, 0.25);
    s.neighbor_law = DenseMatrix(c, c);
    for (std::size_t a = 0; a < c; ++a) {
        const double diag = c == 1 ? 1.0 : rng.uniform(min_diag, 1.0);
        std::vector<double> w(c, 0.0);
        double tot = 0.0;
        for (std::size_t b = 0; b < c; ++b)
            if (b != a) tot += (w[b] = rng.uniform(0.0, 1.0) + 1e-3);
        for (std::size_t b = 0; b < c; ++b) s.neighbor_law(a, b) = b == a ? diag : (1.0 - diag) * w[b] / tot;
        double sum = 0.0;
        for (double p : s.neighbor_law.row(a)) sum += p;
        s.neighbor_law(a, a) += 1.0 - sum;
    }
    DenseMatrix h(c, l);
    for (std::size_t a = 0; a < c; ++a) {
        std::vector<double> dir(l);
        for (double& v : dir) v = rng.normal();
        const double nrm = l2_norm(dir);
        const double len = rng.uniform(1.0, 1.5);
        for (std::size_t k = 0; k < l; ++k) h(a, k) = s.means(a, k) + len * dir[k] / nrm;
    }
    return {std::move(s), std::move(h)};
}

// ---------------------------------------------------------------------------
// Lipschitz bound for rectifier networks
// ---------------------------------------------------------------------------

struct DenseLayer {
    DenseMatrix weight; ///< in × out
    DenseMatrix bias;   ///< 1 × out
};

/// relu between layers, none after the last.
inline std::vector<double> layered_forward(std::span<const DenseLayer> layers, std::span<const double> x) {
    DenseMatrix h(1, x.size(), x);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = matmul(h, layers[i].weight);
        add_row_broadcast(h, layers[i].bias);
        if (i + 1 < layers.size()) h = relu(h);
    }
    return {h.values().begin(), h.values().end()};
}

inline std::vector<DenseLayer> layers_of_mlp(const ParamSet& mlp) {
    return {{mlp.get("W1"), mlp.get("b1")}, {mlp.get("W2"), mlp.get("b2")}};
}

struct LipschitzPair {
    double input_distance = 0.0;
    double output_distance = 0.0;
    double bound = 0.0;
};

struct LipschitzReport {
    double norm_product = 0.0; ///< ∏ ‖W^(l)‖₂ over every layer
    bool norms_converged = true;
    std::vector<LipschitzPair> pairs;
    std::size_t violations = 0;
    double max_ratio = 0.0; ///< max output/(input·product)
};

/// Checks ‖F(x₁)−F(x₂)‖ ≤ ‖x₁−x₂‖·∏‖W‖₂·(1+1e-9) for each given pair.
inline LipschitzReport lemma3_lipschitz_check(std::span<const DenseLayer> layers,
                                              std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs) {
    LipschitzReport rep;
    rep.norm_product = 1.0;
    for (const auto& l : layers) {
        const SpectralNorm s = spectral_norm(l.weight);
        rep.norm_product *= s.value;
        rep.norms_converged = rep.norms_converged && s.converged;
    }
    for (const auto& [x1, x2] : pairs) {
        LipschitzPair p;
        p.input_distance = l2_distance(x1, x2);
        p.output_distance = l2_distance(layered_forward(layers, x1), layered_forward(layers, x2));
        p.bound = p.input_distance * rep.norm_product;
        if (p.output_distance > p.bound * (1.0 + 1e-9)) ++rep.violations;
        if (p.bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, p.output_distance / p.bound);
        rep.pairs.push_back(p);
    }
    return rep;
}

/// `trials` random two-layer networks (widths 1..12, Glorot weights, uniform
/// biases) each evaluated on one random input pair.
inline LipschitzReport lemma3_random_trials(std::size_t trials, const Rng& rng) {
    LipschitzReport total;
    total.norm_product = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng r = rng.split(static_cast<std::uint64_t>(t));
        const std::size_t in = 1 + r.below(12);
        const std::size_t hid = 1 + r.below(12);
        const std::size_t out = 1 + r.below(12);
        std::vector<DenseLayer> layers{{glorot_uniform(in, hid, r), DenseMatrix(1, hid)},
                                       {glorot_uniform(hid, out, r), DenseMatrix(1, out)}};
        for (auto& l : layers)
            for (double& v : l.bias.values()) v = r.uniform(-1.0, 1.0);
        std::vector<double> x1(in), x2(in);
        const double scale = std::pow(10.0, r.uniform(-3.0, 1.0));
        for (std::size_t k = 0; k < in; ++k) {
            x1[k] = r.uniform(-2.0, 2.0);
            x2[k] = x1[k] + scale * r.uniform(-1.0, 1.0);
        }
        const std::pair<std::vector<double>, std::vector<double>> pr[1] = {{x1, x2}};
        const LipschitzReport one = lemma3_lipschitz_check(layers, pr);
        total.violations += one.violations;
        total.max_ratio = std::max(total.max_ratio, one.max_ratio);
        total.norms_converged = total.norms_converged && one.norms_converged;
        total.norm_product = std::max(total.norm_product, one.norm_product);
        total.pairs.push_back(one.pairs.front());
    }
    return total;
}

} // namespace frgnn
