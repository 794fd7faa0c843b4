#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "frgnn/params.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

struct GradProbe {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradProbe> probes;
    double max_rel_error = 0.0;
};

/// Scalar loss of a parameter set, and its analytic gradient.
struct GradCheckTarget {
    std::function<double(const ParamSet&)> loss;
    std::function<ParamSet(const ParamSet&)> gradient;
};

/// Compares analytic gradients with central differences at `probes` randomly
/// chosen coordinates (every coordinate when `probes` is 0 or exceeds the
/// parameter count). Relative error is |a−n| / max(|a|+|n|, floor).
inline GradCheckReport finite_diff_check(const GradCheckTarget& target, const ParamSet& params, Rng& rng,
                                         std::size_t probes, double h = 1e-5, double floor = 1e-6) {
    const ParamSet analytic = target.gradient(params);
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t i = 0; i < params[p].value.size(); ++i) coords.emplace_back(p, i);
    if (probes != 0 && probes < coords.size()) {
        rng.shuffle(coords);
        coords.resize(probes);
        std::sort(coords.begin(), coords.end());
    }

    GradCheckReport report;
    ParamSet work = params;
    for (auto [p, i] : coords) {
        double& w = work[p].value.values()[i];
        const double saved = w;
        w = saved + h;
        const double up = target.loss(work);
        w = saved - h;
        const double down = target.loss(work);
        w = saved;
        GradProbe probe;
        probe.param = params[p].name;
        probe.index = i;
        probe.analytic = analytic[p].value.values()[i];
        probe.numeric = (up - down) / (2.0 * h);
        probe.rel_error =
            std::abs(probe.analytic - probe.numeric) / std::max(std::abs(probe.analytic) + std::abs(probe.numeric), floor);
        report.max_rel_error = std::max(report.max_rel_error, probe.rel_error);
        report.probes.push_back(std::move(probe));
    }
    return report;
}

} // namespace frgnn
