#pragma once

#include <nlohmann/json.hpp>

#include "modiffe/data/interactions.hpp"
#include "modiffe/nn/adam.hpp"
#include "modiffe/nn/matrix.hpp"
#include "modiffe/prior/bpr.hpp"

namespace modiffe::diffusion {

using data::Id;

struct ConditionConfig {
    int epochs = 100;
    std::size_t batch_size = 256;
    double lr = 5e-3;
    double init_std = 0.1;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const ConditionConfig& c) {
    return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"init_std", c.init_std},
            {"seed", c.seed}};
}

// Composition-derived features. Only the bundle-item relation is used,
// so every bundle and item has a condition whether or not it has users.
struct ConditionProvider {
    Matrix item_cond;    // items x d_c
    Matrix bundle_cond;  // bundles x d_c, mean of member item conditions

    int dim() const { return static_cast<int>(item_cond.cols()); }
};

inline Matrix mean_over_members(const Matrix& item_cond, const data::InteractionSet& z) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(z.n_rows()), item_cond.cols());
    for (Id b = 0; b < z.n_rows(); ++b) {
        const auto& items = z.rows()[b];
        if (items.empty()) continue;
        for (Id i : items) out.row(b) += item_cond.row(i);
        out.row(b) /= static_cast<double>(items.size());
    }
    return out;
}

// BPR matrix factorization on (bundle, member item, non-member item)
// triples of Z. Item factors become the item conditions.
inline ConditionProvider pretrain_conditions(const data::InteractionSet& z, int dim, const ConditionConfig& cfg) {
    if (z.empty()) throw ParameterError("pretrain_conditions: Z is empty");
    if (dim < 1) throw ParameterError("pretrain_conditions: dimension must be positive");
    nn::Rng rng = nn::Rng(cfg.seed).split(0xC0D0);
    Matrix bundles = nn::normal_matrix(static_cast<Eigen::Index>(z.n_rows()), dim, cfg.init_std, rng);
    Matrix items = nn::normal_matrix(static_cast<Eigen::Index>(z.n_cols()), dim, cfg.init_std, rng);
    nn::AdamState adam(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, 0.0});
    const std::vector<nn::ParamBlock> blocks = {
        {std::span<double>(bundles.data(), static_cast<std::size_t>(bundles.size())), 0},
        {std::span<double>(items.data(), static_cast<std::size_t>(items.size())), 0}};
    std::vector<Id> all_items(z.n_cols());
    for (Id i = 0; i < z.n_cols(); ++i) all_items[i] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto triples = prior::sample_triples(z, all_items, rng);
        rng.shuffle(std::span<prior::Triple>(triples));
        for (std::size_t start = 0; start < triples.size(); start += cfg.batch_size) {
            const std::vector<prior::Triple> batch(
                triples.begin() + static_cast<std::ptrdiff_t>(start),
                triples.begin() + static_cast<std::ptrdiff_t>(std::min(triples.size(), start + cfg.batch_size)));
            auto r = prior::bpr_loss_and_grad(bundles, items, batch);
            const double scale = 1.0 / static_cast<double>(batch.size());
            r.d_user *= scale;
            r.d_bundle *= scale;
            const std::vector<std::span<const double>> grads = {
                {r.d_user.data(), static_cast<std::size_t>(r.d_user.size())},
                {r.d_bundle.data(), static_cast<std::size_t>(r.d_bundle.size())}};
            nn::adam_step(adam, blocks, grads);
        }
    }
    return ConditionProvider{items, mean_over_members(items, z)};
}

}  // namespace modiffe::diffusion
