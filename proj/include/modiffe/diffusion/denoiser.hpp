#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/diffusion/schedule.hpp"
#include "modiffe/nn/adam.hpp"
#include "modiffe/nn/mlp.hpp"

namespace modiffe::diffusion {

using nn::Matrix;
using nn::Vector;

// Sinusoidal embedding of t/T: first half sin(p * w_j), second half
// cos(p * w_j), with p = 1000 t / T and w_j = 10000^(-j / half).
inline Vector time_embedding(int t, int steps, int dim) {
    Vector e(dim);
    const int half = dim / 2;
    const double p = 1000.0 * static_cast<double>(t) / static_cast<double>(steps);
    for (int j = 0; j < half; ++j) {
        const double w = std::exp(-std::log(10000.0) * static_cast<double>(j) / std::max(half, 1));
        e[j] = std::sin(p * w);
        e[j + half] = std::cos(p * w);
    }
    if (dim % 2 == 1) e[dim - 1] = 0.0;
    return e;
}

struct DenoiserConfig {
    int time_dim = 64;
    int hidden_mult = 4;  // two hidden layers of width hidden_mult * dim
    int epochs = 400;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const DenoiserConfig& c) {
    return {{"time_dim", c.time_dim}, {"hidden_mult", c.hidden_mult}, {"epochs", c.epochs},
            {"batch_size", c.batch_size}, {"lr", c.lr}, {"weight_decay", c.weight_decay}, {"seed", c.seed}};
}

// x0-predicting network: x0_hat = MLP([x_t, c, time_embedding(t)]).
struct Denoiser {
    int dim = 0;
    int cond_dim = 0;
    int time_dim = 0;
    int steps = 0;
    nn::MlpParams net;

    Matrix assemble(const Matrix& x_t, const Matrix& cond, std::span<const int> t) const {
        if (x_t.cols() != dim || cond.cols() != cond_dim || x_t.rows() != cond.rows() ||
            static_cast<std::size_t>(x_t.rows()) != t.size())
            throw ShapeError("denoiser: input shape mismatch");
        Matrix in(x_t.rows(), dim + cond_dim + time_dim);
        for (Eigen::Index r = 0; r < x_t.rows(); ++r) {
            in.row(r).head(dim) = x_t.row(r);
            in.row(r).segment(dim, cond_dim) = cond.row(r);
            in.row(r).tail(time_dim) = time_embedding(t[static_cast<std::size_t>(r)], steps, time_dim).transpose();
        }
        return in;
    }

    Matrix predict(const Matrix& x_t, const Matrix& cond, std::span<const int> t) const {
        return nn::mlp_forward(net, assemble(x_t, cond, t)).output;
    }

    Vector predict(const Vector& x_t, const Vector& cond, int t) const {
        const std::array<int, 1> ts{t};
        return predict(Matrix(x_t.transpose()), Matrix(cond.transpose()), ts).row(0).transpose();
    }
};

inline Denoiser make_denoiser(int dim, int cond_dim, int steps, const DenoiserConfig& cfg) {
    nn::Rng rng = nn::Rng(cfg.seed).split(0xD1F0);
    const Eigen::Index hidden = static_cast<Eigen::Index>(cfg.hidden_mult) * dim;
    const std::array<Eigen::Index, 4> dims{dim + cond_dim + cfg.time_dim, hidden, hidden, dim};
    return Denoiser{dim, cond_dim, cfg.time_dim, steps, nn::make_mlp(dims, nn::Activation::SiLU, rng)};
}

// Mean over the batch of ||x0 - x0_hat||^2 for given noised inputs, and the
// parameter gradients of that loss.
struct DenoiseLoss {
    double loss = 0.0;
    nn::MlpGrads grads;
};

inline DenoiseLoss denoise_loss_and_grad(const Denoiser& d, const Matrix& x0, const Matrix& x_t, const Matrix& cond,
                                         std::span<const int> t) {
    const nn::MlpTape tape = nn::mlp_forward(d.net, d.assemble(x_t, cond, t));
    const Matrix diff = tape.output - x0;
    const double n = static_cast<double>(x0.rows());
    DenoiseLoss out;
    out.loss = diff.squaredNorm() / n;
    out.grads = nn::mlp_backward(d.net, tape, (2.0 / n) * diff);
    return out;
}

struct DiffusionTrainResult {
    Denoiser denoiser;
    std::vector<double> epoch_loss;
};

// Every epoch each warm sample draws t ~ U{1..T} and eps ~ N(0, I), forms
// x_t by forward noising and regresses x0 from (x_t, c, t).
inline DiffusionTrainResult train_diffusion(const Matrix& warm_reps, const Matrix& conds, const NoiseSchedule& s,
                                            const DenoiserConfig& cfg,
                                            const std::function<void(int, double)>& on_epoch = {}) {
    if (warm_reps.rows() == 0) throw ParameterError("train_diffusion: no warm representations");
    if (conds.rows() != warm_reps.rows()) throw ShapeError("train_diffusion: one condition per sample required");
    nn::require_finite(warm_reps, "train_diffusion reps");
    DiffusionTrainResult res{make_denoiser(static_cast<int>(warm_reps.cols()), static_cast<int>(conds.cols()), s.steps,
                                           cfg),
                             {}};
    Denoiser& d = res.denoiser;
    nn::AdamState adam(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    std::vector<nn::ParamBlock> blocks;
    for (auto b : d.net.blocks()) blocks.push_back({b, 0});
    nn::Rng rng = nn::Rng(cfg.seed).split(0xD1F1);
    const auto n = static_cast<std::size_t>(warm_reps.rows());
    const Eigen::Index dim = warm_reps.cols();
    std::vector<std::size_t> order(n);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t m = std::min(cfg.batch_size, n - start);
            Matrix x0(static_cast<Eigen::Index>(m), dim), xt(static_cast<Eigen::Index>(m), dim),
                c(static_cast<Eigen::Index>(m), conds.cols());
            std::vector<int> ts(m);
            for (std::size_t r = 0; r < m; ++r) {
                const auto src = static_cast<Eigen::Index>(order[start + r]);
                const auto row = static_cast<Eigen::Index>(r);
                ts[r] = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(s.steps)));
                const double ab = s.alpha_bar(ts[r]);
                x0.row(row) = warm_reps.row(src);
                c.row(row) = conds.row(src);
                for (Eigen::Index j = 0; j < dim; ++j)
                    xt(row, j) = std::sqrt(ab) * x0(row, j) + std::sqrt(1.0 - ab) * rng.normal();
            }
            DenoiseLoss l = denoise_loss_and_grad(d, x0, xt, c, ts);
            if (!std::isfinite(l.loss))
                throw DivergenceError("train_diffusion: non-finite loss at epoch " + std::to_string(epoch));
            std::vector<std::span<const double>> grads;
            for (auto g : l.grads.blocks()) grads.emplace_back(g);
            nn::adam_step(adam, blocks, grads);
            ++d.net.generation;
            total += l.loss * static_cast<double>(m);
        }
        res.epoch_loss.push_back(total / static_cast<double>(n));
        if (on_epoch) on_epoch(epoch, res.epoch_loss.back());
    }
    return res;
}

}  // namespace modiffe::diffusion
