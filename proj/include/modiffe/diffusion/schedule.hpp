#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "modiffe/error.hpp"
#include "modiffe/nn/matrix.hpp"

namespace modiffe::diffusion {

enum class ScheduleKind { Linear, Cosine, Exp };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Cosine: return "cosine";
        case ScheduleKind::Exp: return "exp";
    }
    return "?";
}

inline ScheduleKind parse_schedule(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    if (s == "exp") return ScheduleKind::Exp;
    throw ParameterError("unknown schedule '" + s + "' (expected linear, cosine or exp)");
}

// Steps are 1-based: beta(t), alpha(t), alpha_bar(t) for t in [1, T].
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Linear;
    int steps = 0;
    std::vector<double> betas, alphas, alpha_bars;  // index t-1

    double beta(int t) const { return betas.at(static_cast<std::size_t>(t - 1)); }
    double alpha(int t) const { return alphas.at(static_cast<std::size_t>(t - 1)); }
    double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t - 1)); }
};

inline constexpr double kBetaStart = 1e-4;
inline constexpr double kBetaEnd = 0.02;
inline constexpr double kCosineOffset = 0.008;
inline constexpr double kMaxBeta = 0.999;

// Linear: betas evenly spaced on [1e-4, 0.02].
// Exp: betas geometrically spaced on [1e-4, 0.02].
// Cosine: alpha_bar(t) = f(t) / f(0), f(t) = cos^2(((t/T + s) / (1 + s)) * pi/2)
//         with s = 0.008; betas derived from consecutive ratios and clipped
//         at 0.999.
// alpha_bar is always recomputed as the running product of 1 - beta.
inline NoiseSchedule make_schedule(ScheduleKind kind, int steps) {
    if (steps < 2) throw ParameterError("make_schedule: T must be at least 2");
    NoiseSchedule s;
    s.kind = kind;
    s.steps = steps;
    s.betas.resize(static_cast<std::size_t>(steps));
    const double span = static_cast<double>(steps - 1);
    switch (kind) {
        case ScheduleKind::Linear:
            for (int t = 1; t <= steps; ++t) s.betas[t - 1] = kBetaStart + (kBetaEnd - kBetaStart) * (t - 1) / span;
            break;
        case ScheduleKind::Exp: {
            const double ratio = std::log(kBetaEnd / kBetaStart);
            for (int t = 1; t <= steps; ++t) s.betas[t - 1] = kBetaStart * std::exp(ratio * (t - 1) / span);
            break;
        }
        case ScheduleKind::Cosine: {
            auto f = [&](double t) {
                const double c = std::cos((t / steps + kCosineOffset) / (1.0 + kCosineOffset) * std::numbers::pi / 2.0);
                return c * c;
            };
            const double f0 = f(0.0);
            for (int t = 1; t <= steps; ++t) {
                const double prev = f(t - 1.0) / f0;
                const double cur = f(static_cast<double>(t)) / f0;
                s.betas[t - 1] = std::min(1.0 - cur / prev, kMaxBeta);
            }
            break;
        }
    }
    s.betas.back() = std::min(s.betas.back(), kMaxBeta);
    s.betas.front() = std::max(s.betas.front(), 1e-12);
    double prod = 1.0;
    for (double b : s.betas) {
        s.alphas.push_back(1.0 - b);
        prod *= 1.0 - b;
        s.alpha_bars.push_back(prod);
    }
    return s;
}

inline void check_step(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.steps)
        throw ParameterError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(s.steps) + "]");
}

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
inline nn::Vector forward_noise(const nn::Vector& x0, int t, const nn::Vector& eps, const NoiseSchedule& s) {
    check_step(s, t);
    if (x0.size() != eps.size()) throw ShapeError("forward_noise: x0 and eps differ in length");
    const double ab = s.alpha_bar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

// Noise implied by x_t and a prediction of x0; inverts forward_noise.
inline nn::Vector implied_noise(const nn::Vector& x_t, const nn::Vector& x0_hat, int t, const NoiseSchedule& s) {
    check_step(s, t);
    const double ab = s.alpha_bar(t);
    return (x_t - std::sqrt(ab) * x0_hat) / std::sqrt(1.0 - ab);
}

}  // namespace modiffe::diffusion
