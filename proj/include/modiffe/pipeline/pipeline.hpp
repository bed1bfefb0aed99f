#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "modiffe/diffusion/sampler.hpp"
#include "modiffe/eval/metrics.hpp"
#include "modiffe/moe/stage3.hpp"
#include "modiffe/nn/checkpoint.hpp"
#include "modiffe/pipeline/config.hpp"

namespace modiffe::pipeline {

using nn::Checkpoint;
using nn::Matrix;

inline constexpr const char* kStage1 = "stage1";
inline constexpr const char* kStage2 = "stage2";
inline constexpr const char* kStage3 = "stage3";
inline constexpr const char* kStage3NoAug = "stage3_noaug";

using Logger = std::function<void(const std::string&)>;

// Dataset and split a run operates on.
struct Context {
    RunConfig config;
    data::Dataset dataset;
    data::ScenarioSplit split;
    std::vector<std::string> warnings;
};

inline Context make_context(RunConfig cfg) {
    cfg.resolve();
    cfg.validate();
    Context ctx;
    if (cfg.data_dir.empty()) {
        auto synth = data::synth_blockmodel(cfg.synth);
        ctx.dataset = std::move(synth.dataset);
        ctx.warnings = std::move(synth.warnings);
    } else {
        ctx.dataset = data::load_dataset(cfg.data_dir);
    }
    ctx.split = data::make_split(ctx.dataset, cfg.scenario, cfg.seed);
    ctx.config = std::move(cfg);
    return ctx;
}

// ---- stage 1 --------------------------------------------------------------

inline Checkpoint stage1_checkpoint(const Context& ctx, const prior::Stage1Result& r) {
    Checkpoint ck;
    ck.stage = kStage1;
    ck.config = to_json(ctx.config);
    ck.meta = {{"best_epoch", r.best_epoch}, {"best_val_recall", r.best_val_recall},
               {"epochs_run", r.history.size()}, {"layers", r.model.layers}};
    ck.put("E_u", r.model.user);
    ck.put("E_b", r.model.bundle);
    ck.put("E_i", r.model.item);
    return ck;
}

inline Checkpoint run_stage1(const Context& ctx, const Logger& log = {}) {
    auto res = prior::train_stage1(ctx.split, ctx.config.stage1, [&](const prior::Stage1Epoch& e) {
        if (log)
            log("stage1 epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss) + " val_recall " +
                std::to_string(e.val_recall));
    });
    return stage1_checkpoint(ctx, res);
}

inline void require_stage(const Checkpoint& ck, const char* stage) {
    if (ck.stage != stage)
        throw OrderingError(std::string("expected a '") + stage + "' checkpoint, got '" + ck.stage + "'");
}

inline prior::PriorModel prior_model(const Checkpoint& s1) {
    require_stage(s1, kStage1);
    prior::PriorModel m;
    m.user = s1.get("E_u");
    m.bundle = s1.get("E_b");
    m.item = s1.get("E_i");
    m.layers = s1.meta.at("layers").get<int>();
    return m;
}

inline prior::PriorReps prior_reps(const Context& ctx, const Checkpoint& s1) {
    return prior::prior_forward(prior_model(s1), prior::PriorGraphs::from_split(ctx.split));
}

// ---- stage 2 --------------------------------------------------------------

inline void put_mlp(Checkpoint& ck, const std::string& prefix, const nn::MlpParams& p) {
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        ck.put(prefix + ".layer" + std::to_string(k) + ".weight", p.layers[k].weight);
        ck.put(prefix + ".layer" + std::to_string(k) + ".bias", Matrix(p.layers[k].bias));
    }
}

inline nn::MlpParams get_mlp(const Checkpoint& ck, const std::string& prefix, std::size_t n_layers) {
    nn::MlpParams p;
    for (std::size_t k = 0; k < n_layers; ++k) {
        nn::DenseLayer l;
        l.weight = ck.get(prefix + ".layer" + std::to_string(k) + ".weight");
        l.bias = ck.get(prefix + ".layer" + std::to_string(k) + ".bias").col(0);
        l.activation = k + 1 == n_layers ? nn::Activation::Identity : nn::Activation::SiLU;
        p.layers.push_back(std::move(l));
    }
    nn::validate(p);
    return p;
}

struct DiffusionExperts {
    diffusion::NoiseSchedule schedule;
    diffusion::ConditionProvider conditions;
    diffusion::Denoiser bint, iint;
    Matrix bundle_diff;  // bundle-level view diffusion reps, per bundle
    Matrix item_diff;    // item-level view diffusion reps, per item
    std::size_t fallbacks = 0;
};

inline Matrix select_rows(const Matrix& m, const std::vector<data::Id>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    return out;
}

// Trains one denoiser per view on warm embedded reps and generates
// diffusion reps for every bundle and item.
inline DiffusionExperts train_diffusion_experts(const Context& ctx, const prior::PriorReps& reps, const Logger& log = {}) {
    const auto& cfg = ctx.config;
    const auto& split = ctx.split;
    DiffusionExperts ex;
    ex.schedule = diffusion::make_schedule(cfg.schedule, cfg.steps);
    ex.conditions = diffusion::pretrain_conditions(split.z, cfg.dim, cfg.conditions);

    const auto warm_b = split.bundles_with(data::Temperature::Warm);
    const auto warm_i = split.items_with(data::Temperature::Warm);
    auto progress = [&](const char* view) {
        return [&log, view](int epoch, double loss) {
            if (log && (epoch % 50 == 0)) log(std::string("stage2 ") + view + " epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
        };
    };
    ex.bint = diffusion::train_diffusion(select_rows(reps.bint.entity_rep, warm_b),
                                         select_rows(ex.conditions.bundle_cond, warm_b), ex.schedule, cfg.diffusion,
                                         progress("bint"))
                  .denoiser;
    auto icfg = cfg.diffusion;
    icfg.seed = cfg.diffusion.seed + 1;
    ex.iint = diffusion::train_diffusion(select_rows(reps.iint.entity_rep, warm_i),
                                         select_rows(ex.conditions.item_cond, warm_i), ex.schedule, icfg,
                                         progress("iint"))
                  .denoiser;

    const auto bidx = diffusion::bundle_anchor_index(split.z, warm_b, reps.bint.entity_rep);
    const auto iidx = diffusion::item_anchor_index(split.z, warm_i, reps.iint.entity_rep);
    auto gb = diffusion::generate_all(bidx, ex.conditions.bundle_cond, ex.bint, ex.schedule, cfg.sample_steps, cfg.top_n);
    auto gi = diffusion::generate_all(iidx, ex.conditions.item_cond, ex.iint, ex.schedule, cfg.sample_steps, cfg.top_n);
    ex.bundle_diff = std::move(gb.reps);
    ex.item_diff = std::move(gi.reps);
    ex.fallbacks = gb.fallbacks + gi.fallbacks;
    if (log && ex.fallbacks) log("stage2: " + std::to_string(ex.fallbacks) + " entities anchored on the warm mean");
    return ex;
}

inline Checkpoint stage2_checkpoint(const Context& ctx, const Checkpoint& s1, const DiffusionExperts& ex) {
    Checkpoint ck;
    ck.stage = kStage2;
    ck.config = to_json(ctx.config);
    ck.meta = {{"parent", nn::content_hash(s1)},
               {"schedule", {{"kind", diffusion::to_string(ex.schedule.kind)}, {"T", ex.schedule.steps}}},
               {"time_dim", ex.bint.time_dim},
               {"mlp_layers", ex.bint.net.layers.size()},
               {"anchor_fallbacks", ex.fallbacks}};
    ck.put("cond.item", ex.conditions.item_cond);
    put_mlp(ck, "bint.net", ex.bint.net);
    put_mlp(ck, "iint.net", ex.iint.net);
    ck.put("bint.generated", ex.bundle_diff);
    ck.put("iint.generated", ex.item_diff);
    return ck;
}

inline void require_parent(const Checkpoint& child, const Checkpoint& parent) {
    if (child.meta.value("parent", std::string()) != nn::content_hash(parent))
        throw OrderingError("checkpoint '" + child.stage + "' was not produced from the given '" + parent.stage +
                            "' checkpoint");
}

inline DiffusionExperts diffusion_experts(const Context& ctx, const Checkpoint& s1, const Checkpoint& s2) {
    require_stage(s2, kStage2);
    require_parent(s2, s1);
    DiffusionExperts ex;
    const auto& sched = s2.meta.at("schedule");
    ex.schedule = diffusion::make_schedule(diffusion::parse_schedule(sched.at("kind").get<std::string>()),
                                           sched.at("T").get<int>());
    ex.conditions.item_cond = s2.get("cond.item");
    ex.conditions.bundle_cond = diffusion::mean_over_members(ex.conditions.item_cond, ctx.split.z);
    const auto n_layers = s2.meta.at("mlp_layers").get<std::size_t>();
    const int time_dim = s2.meta.at("time_dim").get<int>();
    const int dim = static_cast<int>(s2.get("bint.generated").cols());
    ex.bint = diffusion::Denoiser{dim, ex.conditions.dim(), time_dim, ex.schedule.steps, get_mlp(s2, "bint.net", n_layers)};
    ex.iint = diffusion::Denoiser{dim, ex.conditions.dim(), time_dim, ex.schedule.steps, get_mlp(s2, "iint.net", n_layers)};
    ex.bundle_diff = s2.get("bint.generated");
    ex.item_diff = s2.get("iint.generated");
    ex.fallbacks = s2.meta.value("anchor_fallbacks", std::size_t{0});
    return ex;
}

inline Checkpoint run_stage2(const Context& ctx, const Checkpoint& s1, const Logger& log = {}) {
    require_stage(s1, kStage1);
    return stage2_checkpoint(ctx, s1, train_diffusion_experts(ctx, prior_reps(ctx, s1), log));
}

// ---- stage 3 --------------------------------------------------------------

inline moe::ExpertOutputs expert_outputs(const Context& ctx, const prior::PriorReps& reps, const Matrix& bundle_diff,
                                         const Matrix& item_diff) {
    moe::ExpertOutputs ex;
    ex.user_bint = reps.bint.user_rep;
    ex.user_iint = reps.iint.user_rep;
    ex.bundle_embed = reps.bint.entity_rep;
    ex.bundle_diff = bundle_diff;
    ex.item_embed = reps.iint.entity_rep;
    ex.item_diff = item_diff;
    ex.bundle_feature = moe::bundle_features(ctx.split);
    ex.item_feature = moe::item_features(ctx.split);
    ex.bundle_items = ctx.split.z.rows();
    return ex;
}

inline moe::ExpertOutputs expert_outputs(const Context& ctx, const Checkpoint& s1, const Checkpoint& s2) {
    const auto dx = diffusion_experts(ctx, s1, s2);
    return expert_outputs(ctx, prior_reps(ctx, s1), dx.bundle_diff, dx.item_diff);
}

inline Checkpoint stage3_checkpoint(const Context& ctx, const Checkpoint& s2, const moe::Stage3Result& r,
                                    const moe::Stage3Config& cfg, bool no_aug) {
    Checkpoint ck;
    ck.stage = no_aug ? kStage3NoAug : kStage3;
    ck.config = to_json(ctx.config);
    const moe::AugmentationStats last = r.history.empty() ? moe::AugmentationStats{} : r.history.back().augmentation;
    ck.meta = {{"parent", nn::content_hash(s2)},
               {"eta", cfg.eta},
               {"beta_alpha", cfg.beta_alpha},
               {"q", last.q},
               {"s", last.s},
               {"ineligible_users", last.ineligible_users},
               {"best_epoch", r.best_epoch},
               {"best_val_recall", r.best_val_recall},
               {"epochs_run", r.history.size()}};
    ck.put("W_bint", r.gates.bint.weight);
    ck.put("b_bint", Matrix(r.gates.bint.bias));
    ck.put("W_iint", r.gates.iint.weight);
    ck.put("b_iint", Matrix(r.gates.iint.bias));
    ck.put("W_out", r.gates.out.weight);
    return ck;
}

inline Checkpoint run_stage3(const Context& ctx, const Checkpoint& s1, const Checkpoint& s2, bool no_aug,
                             const Logger& log = {}) {
    require_stage(s1, kStage1);
    require_stage(s2, kStage2);
    const auto experts = expert_outputs(ctx, s1, s2);
    auto cfg = ctx.config.stage3;
    if (no_aug) cfg.eta = 0.0;
    const auto res = moe::train_stage3(ctx.split, experts, cfg, [&](const moe::Stage3Epoch& e) {
        if (log)
            log(std::string(no_aug ? "stage3(no-aug)" : "stage3") + " epoch " + std::to_string(e.epoch) + " loss " +
                std::to_string(e.loss) + " val_recall " + std::to_string(e.val_recall) + " |S| " +
                std::to_string(e.augmentation.s));
    });
    if (log && !res.history.empty() && res.history.back().augmentation.ineligible_users)
        log("stage3: " + std::to_string(res.history.back().augmentation.ineligible_users) +
            " users skipped for augmentation");
    return stage3_checkpoint(ctx, s2, res, cfg, no_aug);
}

inline moe::GateParams gate_params(const Checkpoint& s3) {
    if (s3.stage != kStage3 && s3.stage != kStage3NoAug)
        throw OrderingError("expected a stage-3 checkpoint, got '" + s3.stage + "'");
    moe::GateParams g;
    g.bint.weight = s3.get("W_bint");
    g.bint.bias = s3.get("b_bint").col(0);
    g.iint.weight = s3.get("W_iint");
    g.iint.bias = s3.get("b_iint").col(0);
    g.out.weight = s3.get("W_out");
    return g;
}

// ---- scoring --------------------------------------------------------------

enum class Variant { Full, NoAug, NoMoe, NoDiff };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoAug: return "no_aug";
        case Variant::NoMoe: return "no_moe";
        case Variant::NoDiff: return "no_diff";
    }
    return "?";
}

// Prior experts only: the backbone's two-view inner-product sum.
inline Matrix no_diff_scores(const moe::ExpertOutputs& ex, const data::InteractionSet& z) {
    return ex.user_bint * ex.bundle_embed.transpose() +
           ex.user_iint * prior::aggregate_items(ex.item_embed, z).transpose();
}

// Expert outputs added with equal weight, no gating.
inline Matrix no_moe_scores(const moe::ExpertOutputs& ex, const data::InteractionSet& z) {
    const Matrix bint = ex.bundle_embed + ex.bundle_diff;
    const Matrix iint = prior::aggregate_items(ex.item_embed + ex.item_diff, z);
    return ex.user_bint * bint.transpose() + ex.user_iint * iint.transpose();
}

struct VariantReport {
    Variant variant = Variant::Full;
    eval::MetricReport all, cold, warm;
};

inline VariantReport evaluate_scores(const Context& ctx, Variant v, const Matrix& scores) {
    return {v, eval::evaluate(scores, ctx.split, ctx.config.k, eval::Target::Test, eval::BundleFilter::All),
            eval::evaluate(scores, ctx.split, ctx.config.k, eval::Target::Test, eval::BundleFilter::BintCold),
            eval::evaluate(scores, ctx.split, ctx.config.k, eval::Target::Test, eval::BundleFilter::BintWarm)};
}

inline nlohmann::json to_json(const Context& ctx, const VariantReport& r) {
    return {{"scenario", data::to_string(ctx.split.scenario)},
            {"variant", to_string(r.variant)},
            {"k", ctx.config.k},
            {"recall", r.all.recall},
            {"ndcg", r.all.ndcg},
            {"all", eval::to_json(r.all)},
            {"bint_cold", eval::to_json(r.cold)},
            {"bint_warm", eval::to_json(r.warm)},
            {"config", to_json(ctx.config)}};
}

}  // namespace modiffe::pipeline
