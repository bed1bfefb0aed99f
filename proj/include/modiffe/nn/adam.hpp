#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "modiffe/error.hpp"

namespace modiffe::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    explicit AdamState(AdamConfig c = {}) : config(c) {}
};

// A parameter tensor as seen by the optimizer. When row_width > 0 the
// block is an embedding table and weight decay is only applied to rows
// that received a nonzero gradient in this step, so rows that never take
// part in training stay bit-identical to their initialization.
struct ParamBlock {
    std::span<double> values;
    std::size_t row_width = 0;
};

// Bias-corrected Adam with decoupled weight decay:
//   m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
inline void adam_step(AdamState& state, std::span<const ParamBlock> params,
                      std::span<const std::span<const double>> grads) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient block count mismatch");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t b = 0; b < params.size(); ++b) {
            state.m[b].assign(params[b].values.size(), 0.0);
            state.v[b].assign(params[b].values.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: state was built for a different parameter set");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].values.size() != grads[b].size() || state.m[b].size() != grads[b].size())
            throw ShapeError("adam_step: block " + std::to_string(b) + " size mismatch");
        for (std::size_t i = 0; i < grads[b].size(); ++i) {
            if (!std::isfinite(grads[b][i]))
                throw DivergenceError("adam_step: non-finite gradient in block " + std::to_string(b) + " at index " +
                                      std::to_string(i) + " (step " + std::to_string(state.step + 1) + ")");
        }
    }

    ++state.step;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b].values;
        const auto g = grads[b];
        auto& m = state.m[b];
        auto& v = state.v[b];
        const std::size_t width = params[b].row_width;
        bool decay_row = c.weight_decay != 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (width != 0 && i % width == 0 && c.weight_decay != 0.0) {
                decay_row = false;
                for (std::size_t j = i; j < i + width && !decay_row; ++j) decay_row = g[j] != 0.0;
            }
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double decay = decay_row ? c.weight_decay * p[i] : 0.0;
            p[i] -= c.lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps) + decay);
        }
    }
}

}  // namespace modiffe::nn
