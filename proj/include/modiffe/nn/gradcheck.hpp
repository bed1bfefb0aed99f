#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modiffe/error.hpp"

namespace modiffe::nn {

struct GradCheckReport {
    std::vector<double> block_max_rel_error;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps entries where both
// gradients vanish from dividing by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares `analytic` to central differences of `loss` over every entry of
// `params`. Parameters are perturbed in place and restored exactly.
inline GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<const std::span<double>> params,
                                         std::span<const std::span<const double>> analytic, double h, double tol) {
    if (!(h >= 1e-7 && h <= 1e-3)) throw ParameterError("finite_diff_check: h must lie in [1e-7, 1e-3]");
    if (params.size() != analytic.size()) throw ShapeError("finite_diff_check: block count mismatch");
    GradCheckReport report;
    report.tolerance = tol;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != analytic[b].size()) throw ShapeError("finite_diff_check: block size mismatch");
        double worst = 0.0;
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double saved = params[b][i];
            params[b][i] = saved + h;
            const double up = loss();
            params[b][i] = saved - h;
            const double down = loss();
            params[b][i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, relative_error(analytic[b][i], numeric));
        }
        report.block_max_rel_error.push_back(worst);
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace modiffe::nn
