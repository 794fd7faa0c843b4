#pragma once

#include <cmath>
#include <cstddef>

#include "frgnn/error.hpp"
#include "frgnn/params.hpp"

namespace frgnn {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Coupled (L2) decay: λ·w is added to the gradient before the moments.
    double weight_decay = 0.0;
};

struct AdamState {
    AdamConfig config;
    ParamSet m;
    ParamSet v;
    std::size_t t = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, const ParamSet& params) : config(cfg), m(params.zeros_like()), v(params.zeros_like()) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads) {
    if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v))
        throw ShapeError("adam_step: parameter, gradient and moment layouts differ");
    const AdamConfig& c = state.config;
    ++state.t;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].value.values();
        auto g = grads[p].value.values();
        auto m = state.m[p].value.values();
        auto v = state.v[p].value.values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] + c.weight_decay * w[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

} // namespace frgnn
