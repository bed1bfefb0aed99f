#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/eval/metrics.hpp"
#include "modiffe/moe/pseudo.hpp"
#include "modiffe/nn/adam.hpp"
#include "modiffe/prior/bpr.hpp"

namespace modiffe::moe {

struct Stage3Config {
    double eta = 0.5;         // |S| / |Q|
    double beta_alpha = 0.9;  // lambda ~ Beta(alpha, alpha)
    int epochs = 200;
    int patience = 20;
    std::size_t batch_size = 1024;
    double lr = 1e-2;
    double weight_decay = 0.0;
    std::size_t eval_k = 20;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const Stage3Config& c) {
    return {{"eta", c.eta},         {"beta_alpha", c.beta_alpha},     {"epochs", c.epochs},
            {"patience", c.patience}, {"batch_size", c.batch_size},   {"lr", c.lr},
            {"weight_decay", c.weight_decay}, {"eval_k", c.eval_k}, {"seed", c.seed}};
}

// One side of a training triple: a real bundle id or a pseudo bundle.
using BundleRef = std::variant<Id, PseudoBundle>;

struct GateTriple {
    Id user = 0;
    BundleRef pos, neg;
};

inline BundleParts parts_of(const ExpertOutputs& ex, const BundleRef& r) {
    if (const Id* b = std::get_if<Id>(&r)) return bundle_parts(ex, *b);
    return std::get<PseudoBundle>(r).parts;
}

struct GateLoss {
    double loss = 0.0;
    GateGrads grads;
};

// Sum over triples of -ln sigmoid(y(u, pos) - y(u, neg)) and its gradient
// with respect to all gate matrices. Expert outputs are read only.
inline GateLoss gate_loss_and_grad(const ExpertOutputs& ex, const GateParams& g, const std::vector<GateTriple>& triples) {
    GateLoss out{0.0, GateGrads::zeros_like(g)};
    for (const auto& t : triples) {
        const Vector ub = ex.user_bint.row(t.user).transpose();
        const Vector ui = ex.user_iint.row(t.user).transpose();
        const BundleParts pp = parts_of(ex, t.pos), pn = parts_of(ex, t.neg);
        const FusedBundle fp = fuse_bundle(pp, g), fn = fuse_bundle(pn, g);
        const double margin = predict(ub, ui, fp) - predict(ub, ui, fn);
        out.loss += nn::softplus_neg(margin);
        const double coef = -nn::sigmoid(-margin);
        accumulate_predict_grad(ub, ui, pp, fp, g, coef, out.grads);
        accumulate_predict_grad(ub, ui, pn, fn, g, -coef, out.grads);
    }
    return out;
}

struct AugmentationStats {
    std::size_t q = 0;
    std::size_t s = 0;
    std::size_t ineligible_users = 0;  // users skipped: fewer than two positives
};

// |S| = round(eta |Q|) pseudo triples. Each picks the user of a random Q
// triple (among users with at least two train positives), interpolates two
// of the user's train positives into a pseudo positive and two warm
// bundles the user never interacted with into a pseudo negative.
inline std::vector<GateTriple> augment(const data::ScenarioSplit& split, const ExpertOutputs& ex,
                                       const std::vector<prior::Triple>& q, const std::vector<Id>& warm, double eta,
                                       double beta_alpha, nn::Rng& rng, AugmentationStats& stats) {
    std::vector<GateTriple> s;
    const auto target = static_cast<std::size_t>(std::llround(eta * static_cast<double>(q.size())));
    stats.q = q.size();
    if (target == 0) return s;
    std::vector<std::size_t> eligible;
    std::vector<bool> seen(split.catalog.n_users, false);
    for (std::size_t k = 0; k < q.size(); ++k) {
        const Id u = q[k].user;
        const auto& pos = split.train_x.rows()[u];
        const bool ok = pos.size() >= 2 && warm.size() >= pos.size() + 2;
        if (ok) eligible.push_back(k);
        else if (!seen[u]) ++stats.ineligible_users;
        seen[u] = true;
    }
    if (eligible.empty()) return s;
    s.reserve(target);
    auto two_distinct = [&](auto draw) {
        const Id a = draw();
        Id b = draw();
        while (b == a) b = draw();
        return std::pair{a, b};
    };
    for (std::size_t n = 0; n < target; ++n) {
        const Id u = q[eligible[static_cast<std::size_t>(rng.index(eligible.size()))]].user;
        const auto& pos = split.train_x.rows()[u];
        const auto [px, py] = two_distinct([&] { return pos[static_cast<std::size_t>(rng.index(pos.size()))]; });
        const auto [nx, ny] = two_distinct([&] {
            Id b = 0;
            do b = warm[static_cast<std::size_t>(rng.index(warm.size()))];
            while (split.train_x.contains(u, b));
            return b;
        });
        const double lp = rng.beta(beta_alpha, beta_alpha);
        const double ln = rng.beta(beta_alpha, beta_alpha);
        s.push_back({u, interpolate_pseudo(px, py, lp, ex), interpolate_pseudo(nx, ny, ln, ex)});
    }
    stats.s = s.size();
    return s;
}

struct Stage3Epoch {
    int epoch = 0;
    double loss = 0.0;
    double val_recall = -1.0;
    AugmentationStats augmentation;
};

struct Stage3Result {
    GateParams gates;
    int best_epoch = 0;
    double best_val_recall = -1.0;
    std::vector<Stage3Epoch> history;
};

// Gate training on Q and its pseudo-cold augmentation S. Q holds one
// triple per train interaction with a negative drawn from warm bundles;
// both Q and S are resampled every epoch. Gates with the best validation
// Recall@k are kept, with the same patience rule as stage 1; without
// validation interactions the last epoch wins.
inline Stage3Result train_stage3(const data::ScenarioSplit& split, const ExpertOutputs& ex, const Stage3Config& cfg,
                                 const std::function<void(const Stage3Epoch&)>& on_epoch = {}) {
    if (cfg.eta < 0.0) throw ParameterError("stage3: eta must be non-negative");
    if (!(cfg.beta_alpha > 0.0)) throw ParameterError("stage3: beta alpha must be positive");
    if (cfg.epochs < 0 || cfg.batch_size == 0) throw ParameterError("stage3: invalid configuration");
    Stage3Result res;
    res.gates = init_gates(ex.dim(), cfg.seed);
    GateParams g = res.gates;
    nn::AdamState adam(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    const std::vector<nn::ParamBlock> blocks = {
        {std::span<double>(g.bint.weight.data(), static_cast<std::size_t>(g.bint.weight.size())), 0},
        {std::span<double>(g.iint.weight.data(), static_cast<std::size_t>(g.iint.weight.size())), 0},
        {std::span<double>(g.out.weight.data(), static_cast<std::size_t>(g.out.weight.size())), 0},
        {std::span<double>(g.bint.bias.data(), 2), 0},
        {std::span<double>(g.iint.bias.data(), 2), 0}};
    const auto warm = split.bundles_with(data::Temperature::Warm);
    const bool validate = !split.val_x.empty();
    nn::Rng rng = nn::Rng(cfg.seed).split(0x57A3);
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto q = prior::sample_triples(split.train_x, warm, rng);
        Stage3Epoch rec;
        rec.epoch = epoch;
        std::vector<GateTriple> all = augment(split, ex, q, warm, cfg.eta, cfg.beta_alpha, rng, rec.augmentation);
        for (const auto& t : q) all.push_back({t.user, t.pos, t.neg});
        rng.shuffle(std::span<GateTriple>(all));
        double total = 0.0;
        for (std::size_t start = 0; start < all.size(); start += cfg.batch_size) {
            const std::vector<GateTriple> batch(
                all.begin() + static_cast<std::ptrdiff_t>(start),
                all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), start + cfg.batch_size)));
            GateLoss l = gate_loss_and_grad(ex, g, batch);
            if (!std::isfinite(l.loss)) throw DivergenceError("stage3: non-finite loss at epoch " + std::to_string(epoch));
            l.grads *= 1.0 / static_cast<double>(batch.size());
            const std::vector<std::span<const double>> grads = {
                {l.grads.bint.data(), static_cast<std::size_t>(l.grads.bint.size())},
                {l.grads.iint.data(), static_cast<std::size_t>(l.grads.iint.size())},
                {l.grads.out.data(), static_cast<std::size_t>(l.grads.out.size())},
                {l.grads.bint_bias.data(), 2},
                {l.grads.iint_bias.data(), 2}};
            nn::adam_step(adam, blocks, grads);
            total += l.loss;
        }
        rec.loss = all.empty() ? 0.0 : total / static_cast<double>(all.size());
        if (validate) {
            rec.val_recall = eval::evaluate(moe_scores(ex, g), split, cfg.eval_k, eval::Target::Val).recall;
            if (rec.val_recall > res.best_val_recall) {
                res.best_val_recall = rec.val_recall;
                res.best_epoch = epoch;
                res.gates = g;
                since_best = 0;
            } else {
                ++since_best;
            }
        } else {
            res.best_epoch = epoch;
            res.gates = g;
        }
        res.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (validate && since_best >= cfg.patience) break;
    }
    return res;
}

}  // namespace modiffe::moe
