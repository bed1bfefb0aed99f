#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/data/split.hpp"
#include "modiffe/eval/metrics.hpp"
#include "modiffe/nn/adam.hpp"
#include "modiffe/prior/bpr.hpp"
#include "modiffe/prior/propagate.hpp"

namespace modiffe::prior {

struct Stage1Config {
    int dim = 64;
    int layers = 2;
    int epochs = 100;
    int patience = 10;
    std::size_t batch_size = 1024;
    double lr = 1e-2;
    double weight_decay = 1e-4;
    double init_std = 0.1;
    std::size_t eval_k = 20;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const Stage1Config& c) {
    return {{"dim", c.dim},     {"layers", c.layers},       {"epochs", c.epochs},
            {"patience", c.patience}, {"batch_size", c.batch_size}, {"lr", c.lr},
            {"weight_decay", c.weight_decay}, {"init_std", c.init_std}, {"eval_k", c.eval_k},
            {"seed", c.seed}};
}

// Initial embedding tables shared by both views: users appear in the
// bundle-level graph (X) and the item-level graph (Y).
struct PriorModel {
    Matrix user;    // E_u
    Matrix bundle;  // E_b
    Matrix item;    // E_i
    int layers = 2;
};

struct PriorGraphs {
    BipartiteGraph user_bundle;
    BipartiteGraph user_item;
    const data::InteractionSet* z = nullptr;

    static PriorGraphs from_split(const data::ScenarioSplit& s) {
        return {normalize_adjacency(s.train_x), normalize_adjacency(s.y_train), &s.z};
    }
};

// Embedded representations of every entity in both views.
struct PriorReps {
    ViewEmbeddings bint;  // users x d, bundles x d
    ViewEmbeddings iint;  // users x d, items x d
    Matrix iint_bundle;   // item reps mean-pooled per bundle
};

inline PriorModel init_prior_model(const data::Catalog& cat, const Stage1Config& cfg) {
    nn::Rng rng = nn::Rng(cfg.seed).split(0x5701);
    PriorModel m;
    m.layers = cfg.layers;
    m.user = nn::normal_matrix(static_cast<Eigen::Index>(cat.n_users), cfg.dim, cfg.init_std, rng);
    m.bundle = nn::normal_matrix(static_cast<Eigen::Index>(cat.n_bundles), cfg.dim, cfg.init_std, rng);
    m.item = nn::normal_matrix(static_cast<Eigen::Index>(cat.n_items), cfg.dim, cfg.init_std, rng);
    return m;
}

inline PriorReps prior_forward(const PriorModel& m, const PriorGraphs& g) {
    PriorReps r;
    r.bint = propagate(g.user_bundle, m.user, m.bundle, m.layers, View::Bint);
    r.iint = propagate(g.user_item, m.user, m.item, m.layers, View::Iint);
    r.iint_bundle = aggregate_items(r.iint.entity_rep, *g.z);
    return r;
}

// Backbone prediction: sum of the two views' inner products.
inline Matrix backbone_scores(const PriorReps& r) {
    return r.bint.user_rep * r.bint.entity_rep.transpose() + r.iint.user_rep * r.iint_bundle.transpose();
}

struct PriorGrads {
    double loss = 0.0;
    Matrix user, bundle, item;
};

// Summed two-view BPR loss over `triples` and its gradient with respect to
// the initial tables, through aggregation and propagation.
inline PriorGrads stage1_loss_and_grad(const PriorModel& m, const PriorGraphs& g, const std::vector<Triple>& triples) {
    const PriorReps r = prior_forward(m, g);
    const BprResult b = bpr_loss_and_grad(r.bint.user_rep, r.bint.entity_rep, triples);
    const BprResult i = bpr_loss_and_grad(r.iint.user_rep, r.iint_bundle, triples);
    const Matrix d_items = aggregate_items_backward(i.d_bundle, *g.z);
    const ViewEmbeddings gb = propagate_backward(g.user_bundle, b.d_user, b.d_bundle, m.layers);
    const ViewEmbeddings gi = propagate_backward(g.user_item, i.d_user, d_items, m.layers);
    return PriorGrads{b.loss + i.loss, gb.user_rep + gi.user_rep, gb.entity_rep, gi.entity_rep};
}

struct Stage1Epoch {
    int epoch = 0;
    double loss = 0.0;
    double val_recall = -1.0;
};

struct Stage1Result {
    PriorModel initial;
    PriorModel model;
    PriorReps reps;
    int best_epoch = 0;
    double best_val_recall = -1.0;
    std::vector<Stage1Epoch> history;
};

inline std::vector<Id> warm_bundles(const data::ScenarioSplit& s) { return s.bundles_with(data::Temperature::Warm); }

// Mini-batch Adam on the summed two-view BPR loss. Negatives are drawn
// from bundles with train interactions, resampled each epoch. The model
// with the best validation Recall@k on bint-warm bundles is kept; training
// stops after `patience` epochs without improvement.
inline Stage1Result train_stage1(const data::ScenarioSplit& split, const Stage1Config& cfg,
                                 const std::function<void(const Stage1Epoch&)>& on_epoch = {}) {
    if (cfg.dim < 1 || cfg.layers < 1 || cfg.epochs < 0 || cfg.batch_size == 0)
        throw ParameterError("stage1: invalid configuration");
    const PriorGraphs graphs = PriorGraphs::from_split(split);
    Stage1Result res;
    res.initial = init_prior_model(split.catalog, cfg);
    res.model = res.initial;
    PriorModel& m = res.model;

    nn::AdamState adam(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    const auto width = static_cast<std::size_t>(cfg.dim);
    const std::vector<nn::ParamBlock> blocks = {
        {std::span<double>(m.user.data(), static_cast<std::size_t>(m.user.size())), width},
        {std::span<double>(m.bundle.data(), static_cast<std::size_t>(m.bundle.size())), width},
        {std::span<double>(m.item.data(), static_cast<std::size_t>(m.item.size())), width}};
    const auto candidates = warm_bundles(split);
    nn::Rng rng = nn::Rng(cfg.seed).split(0x5702);
    // Only bundles with train interactions can be ranked by the backbone, so
    // validation counts positives on those. In ColdStart none exist and the
    // full epoch budget runs.
    bool validate = false;
    for (const auto& [u, b] : split.val_x.pairs()) validate = validate || !split.bint_cold(b);

    PriorModel best = m;
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto triples = sample_triples(split.train_x, candidates, rng);
        rng.shuffle(std::span<Triple>(triples));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < triples.size(); start += cfg.batch_size) {
            const std::vector<Triple> batch(triples.begin() + static_cast<std::ptrdiff_t>(start),
                                            triples.begin() + static_cast<std::ptrdiff_t>(
                                                                  std::min(triples.size(), start + cfg.batch_size)));
            PriorGrads gr = stage1_loss_and_grad(m, graphs, batch);
            if (!std::isfinite(gr.loss))
                throw DivergenceError("stage1: non-finite loss at epoch " + std::to_string(epoch));
            const double scale = 1.0 / static_cast<double>(batch.size());
            gr.user *= scale;
            gr.bundle *= scale;
            gr.item *= scale;
            const std::vector<std::span<const double>> grads = {
                {gr.user.data(), static_cast<std::size_t>(gr.user.size())},
                {gr.bundle.data(), static_cast<std::size_t>(gr.bundle.size())},
                {gr.item.data(), static_cast<std::size_t>(gr.item.size())}};
            nn::adam_step(adam, blocks, grads);
            epoch_loss += gr.loss;
        }
        Stage1Epoch rec{epoch, triples.empty() ? 0.0 : epoch_loss / double(triples.size()), -1.0};
        if (validate) {
            const Matrix scores = backbone_scores(prior_forward(m, graphs));
            rec.val_recall = eval::evaluate(scores, split, cfg.eval_k, eval::Target::Val, eval::BundleFilter::BintWarm).recall;
            if (rec.val_recall > res.best_val_recall) {
                res.best_val_recall = rec.val_recall;
                res.best_epoch = epoch;
                best = m;
                since_best = 0;
            } else {
                ++since_best;
            }
        } else {
            res.best_epoch = epoch;
            best = m;
        }
        res.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (validate && since_best >= cfg.patience) break;
    }
    m = best;
    res.reps = prior_forward(m, graphs);
    return res;
}

}  // namespace modiffe::prior
