#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/data/split.hpp"
#include "modiffe/data/synth.hpp"
#include "modiffe/diffusion/conditions.hpp"
#include "modiffe/diffusion/denoiser.hpp"
#include "modiffe/moe/stage3.hpp"
#include "modiffe/prior/stage1.hpp"

namespace modiffe::pipeline {

// Gate interpolation ratio per scenario when none is configured.
inline double default_eta(data::Scenario s) {
    switch (s) {
        case data::Scenario::WarmStart: return 0.0;
        case data::Scenario::AllBundle: return 0.3;
        case data::Scenario::ColdStart: return 0.5;
    }
    return 0.0;
}

struct RunConfig {
    std::string data_dir;             // empty: use the synthetic generator
    data::SynthParams synth;
    data::Scenario scenario = data::Scenario::ColdStart;
    std::uint64_t seed = 7;

    int dim = 64;
    int layers = 2;
    int steps = 500;          // T
    int sample_steps = 20;    // T'
    diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Linear;
    std::size_t top_n = 5;
    std::optional<double> eta;
    double beta_alpha = 0.9;
    std::size_t k = 20;

    prior::Stage1Config stage1;
    diffusion::DenoiserConfig diffusion;
    diffusion::ConditionConfig conditions;
    moe::Stage3Config stage3;

    std::vector<double> lr_grid{0.01, 0.003, 0.001, 0.0003, 0.0001};
    std::vector<double> weight_decay_grid{1e-4, 1e-5, 1e-6, 1e-7, 0.0};

    double effective_eta() const { return eta.value_or(default_eta(scenario)); }

    // Copies shared settings into the per-stage configs.
    void resolve() {
        stage1.dim = dim;
        stage1.layers = layers;
        stage1.eval_k = k;
        stage1.seed = seed;
        diffusion.seed = seed;
        conditions.seed = seed;
        stage3.seed = seed;
        stage3.eval_k = k;
        stage3.eta = effective_eta();
        stage3.beta_alpha = beta_alpha;
    }

    void validate() const {
        if (dim < 1) throw ParameterError("config: dim must be positive");
        if (layers < 1) throw ParameterError("config: layers (K) must be at least 1");
        if (steps < 2) throw ParameterError("config: T must be at least 2");
        if (sample_steps < 1 || sample_steps > steps) throw ParameterError("config: T_prime must lie in [1, T]");
        if (top_n < 1) throw ParameterError("config: top_n must be at least 1");
        if (effective_eta() < 0.0) throw ParameterError("config: eta must be non-negative");
        if (!(beta_alpha > 0.0)) throw ParameterError("config: beta_alpha must be positive");
        if (k < 1) throw ParameterError("config: k must be at least 1");
        if (stage1.epochs < 0 || diffusion.epochs < 0 || conditions.epochs < 0 || stage3.epochs < 0)
            throw ParameterError("config: epoch budgets must be non-negative");
        if (stage1.lr <= 0 || diffusion.lr <= 0 || conditions.lr <= 0 || stage3.lr <= 0)
            throw ParameterError("config: learning rates must be positive");
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j = {{"data_dir", c.data_dir},
                        {"synth", data::to_json(c.synth)},
                        {"scenario", data::to_string(c.scenario)},
                        {"seed", c.seed},
                        {"dim", c.dim},
                        {"layers", c.layers},
                        {"T", c.steps},
                        {"T_prime", c.sample_steps},
                        {"schedule", diffusion::to_string(c.schedule)},
                        {"top_n", c.top_n},
                        {"eta", c.effective_eta()},
                        {"beta_alpha", c.beta_alpha},
                        {"k", c.k},
                        {"stage1", prior::to_json(c.stage1)},
                        {"diffusion", diffusion::to_json(c.diffusion)},
                        {"conditions", diffusion::to_json(c.conditions)},
                        {"stage3", moe::to_json(c.stage3)},
                        {"lr_grid", c.lr_grid},
                        {"weight_decay_grid", c.weight_decay_grid}};
    return j;
}

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ParameterError("config: unknown key '" + where + key + "'");
    }
}

}  // namespace detail

// Applies a JSON document on top of `c`; keys absent from `j` keep their
// current value. Unknown keys are rejected.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
    using detail::read;
    try {
        detail::check_keys(j,
                           {"data_dir", "synth", "scenario", "seed", "dim", "layers", "T", "T_prime", "schedule",
                            "top_n", "eta", "beta_alpha", "k", "stage1", "diffusion", "conditions", "stage3",
                            "lr_grid", "weight_decay_grid"},
                           "");
        read(j, "data_dir", c.data_dir);
        if (j.contains("scenario")) c.scenario = data::parse_scenario(j.at("scenario").get<std::string>());
        read(j, "seed", c.seed);
        read(j, "dim", c.dim);
        read(j, "layers", c.layers);
        read(j, "T", c.steps);
        read(j, "T_prime", c.sample_steps);
        if (j.contains("schedule")) c.schedule = diffusion::parse_schedule(j.at("schedule").get<std::string>());
        read(j, "top_n", c.top_n);
        if (j.contains("eta") && !j.at("eta").is_null()) c.eta = j.at("eta").get<double>();
        read(j, "beta_alpha", c.beta_alpha);
        read(j, "k", c.k);
        read(j, "lr_grid", c.lr_grid);
        read(j, "weight_decay_grid", c.weight_decay_grid);
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            detail::check_keys(s, {"n_users", "n_items", "n_bundles", "groups", "bundle_size", "affinity", "cross", "seed"},
                               "synth.");
            read(s, "n_users", c.synth.n_users);
            read(s, "n_items", c.synth.n_items);
            read(s, "n_bundles", c.synth.n_bundles);
            read(s, "groups", c.synth.groups);
            read(s, "bundle_size", c.synth.bundle_size);
            read(s, "affinity", c.synth.affinity);
            if (s.contains("cross") && !s.at("cross").is_null()) c.synth.cross = s.at("cross").get<double>();
            read(s, "seed", c.synth.seed);
        }
        if (j.contains("stage1")) {
            const auto& s = j.at("stage1");
            detail::check_keys(s, {"dim", "layers", "epochs", "patience", "batch_size", "lr", "weight_decay",
                                   "init_std", "eval_k", "seed"},
                               "stage1.");
            read(s, "epochs", c.stage1.epochs);
            read(s, "patience", c.stage1.patience);
            read(s, "batch_size", c.stage1.batch_size);
            read(s, "lr", c.stage1.lr);
            read(s, "weight_decay", c.stage1.weight_decay);
            read(s, "init_std", c.stage1.init_std);
        }
        if (j.contains("diffusion")) {
            const auto& s = j.at("diffusion");
            detail::check_keys(s, {"time_dim", "hidden_mult", "epochs", "batch_size", "lr", "weight_decay", "seed"},
                               "diffusion.");
            read(s, "time_dim", c.diffusion.time_dim);
            read(s, "hidden_mult", c.diffusion.hidden_mult);
            read(s, "epochs", c.diffusion.epochs);
            read(s, "batch_size", c.diffusion.batch_size);
            read(s, "lr", c.diffusion.lr);
            read(s, "weight_decay", c.diffusion.weight_decay);
        }
        if (j.contains("conditions")) {
            const auto& s = j.at("conditions");
            detail::check_keys(s, {"epochs", "batch_size", "lr", "init_std", "seed"}, "conditions.");
            read(s, "epochs", c.conditions.epochs);
            read(s, "batch_size", c.conditions.batch_size);
            read(s, "lr", c.conditions.lr);
            read(s, "init_std", c.conditions.init_std);
        }
        if (j.contains("stage3")) {
            const auto& s = j.at("stage3");
            detail::check_keys(s, {"eta", "beta_alpha", "epochs", "patience", "batch_size", "lr", "weight_decay", "eval_k", "seed"},
                               "stage3.");
            read(s, "epochs", c.stage3.epochs);
            read(s, "patience", c.stage3.patience);
            read(s, "batch_size", c.stage3.batch_size);
            read(s, "lr", c.stage3.lr);
            read(s, "weight_decay", c.stage3.weight_decay);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    c.resolve();
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    RunConfig c;
    apply_json(c, j);
    return c;
}

}  // namespace modiffe::pipeline
