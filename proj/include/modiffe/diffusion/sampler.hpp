#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "modiffe/diffusion/anchor.hpp"
#include "modiffe/diffusion/conditions.hpp"
#include "modiffe/diffusion/denoiser.hpp"

namespace modiffe::diffusion {

// T' timesteps strided uniformly over [1, T], descending, starting at T:
// t_j = T - floor(j (T - 1) / (T' - 1)).
inline std::vector<int> sampling_steps(int steps, int sample_steps) {
    if (sample_steps < 1 || sample_steps > steps)
        throw ParameterError("sampling_steps: T' must lie in [1, " + std::to_string(steps) + "]");
    std::vector<int> out(static_cast<std::size_t>(sample_steps));
    for (int j = 0; j < sample_steps; ++j)
        out[static_cast<std::size_t>(j)] =
            sample_steps == 1 ? steps
                              : steps - static_cast<int>((static_cast<long long>(j) * (steps - 1)) / (sample_steps - 1));
    return out;
}

// Deterministic strided reverse process for a batch of rows. The start
// rows sit at the first selected step; at each step the network predicts
// x0, the implied noise is recovered, and the state moves to the next
// selected step with no fresh noise. Returns the last x0 prediction.
inline Matrix reverse_denoise(const Matrix& start, const Matrix& cond, const Denoiser& d, const NoiseSchedule& s,
                              int sample_steps) {
    const auto ts = sampling_steps(s.steps, sample_steps);
    Matrix x = start;
    Matrix x0_hat;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        const int t = ts[j];
        const std::vector<int> tcol(static_cast<std::size_t>(x.rows()), t);
        x0_hat = d.predict(x, cond, tcol);
        if (!nn::all_finite(x0_hat))
            throw DivergenceError("reverse_denoise: non-finite prediction at step index " + std::to_string(j) +
                                  " (t = " + std::to_string(t) + ")");
        if (j + 1 == ts.size()) break;
        const double ab = s.alpha_bar(t);
        const double ab_next = s.alpha_bar(ts[j + 1]);
        const Matrix eps_hat = (x - std::sqrt(ab) * x0_hat) / std::sqrt(1.0 - ab);
        x = std::sqrt(ab_next) * x0_hat + std::sqrt(1.0 - ab_next) * eps_hat;
    }
    return x0_hat;
}

inline Vector reverse_denoise(const Vector& start, const Vector& cond, const Denoiser& d, const NoiseSchedule& s,
                              int sample_steps) {
    return reverse_denoise(Matrix(start.transpose()), Matrix(cond.transpose()), d, s, sample_steps).row(0).transpose();
}

struct GenerateResult {
    Matrix reps;                  // one row per entity of the layer
    std::size_t fallbacks = 0;    // entities anchored on the warm mean
};

// Diffusion representation of every entity in a layer (warm and cold
// alike): anchor from composition-similar warm entities, then the
// conditional reverse process. Inputs are limited to the composition
// index, per-entity conditions and the trained denoiser.
inline GenerateResult generate_all(const AnchorIndex& idx, const Matrix& conds, const Denoiser& d,
                                   const NoiseSchedule& s, int sample_steps, std::size_t top_n,
                                   std::size_t batch = 256) {
    const auto n = static_cast<Eigen::Index>(idx.composition.size());
    if (conds.rows() != n) throw ShapeError("generate_all: one condition row per entity required");
    GenerateResult out{Matrix(n, d.dim), 0};
    Matrix starts(n, d.dim);
    for (Eigen::Index e = 0; e < n; ++e) {
        Anchor a = anchor(static_cast<Id>(e), idx, top_n);
        out.fallbacks += a.fallback ? 1 : 0;
        starts.row(e) = a.value.transpose();
    }
    for (Eigen::Index lo = 0; lo < n; lo += static_cast<Eigen::Index>(batch)) {
        const Eigen::Index m = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch), n - lo);
        out.reps.middleRows(lo, m) = reverse_denoise(Matrix(starts.middleRows(lo, m)), Matrix(conds.middleRows(lo, m)),
                                                     d, s, sample_steps);
    }
    return out;
}

}  // namespace modiffe::diffusion
