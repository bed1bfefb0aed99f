#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/data/dataset.hpp"
#include "modiffe/nn/rng.hpp"

namespace modiffe::data {

// Planted block model. Users, items and bundles each belong to one of
// `groups` latent groups; an edge between entities of the same group is
// present with probability `affinity`, across groups with probability
// `cross` (affinity / 10 unless set).
struct SynthParams {
    std::size_t n_users = 400;
    std::size_t n_items = 800;
    std::size_t n_bundles = 200;
    std::size_t groups = 4;
    std::size_t bundle_size = 10;
    double affinity = 0.3;
    std::optional<double> cross;
    std::uint64_t seed = 7;

    double cross_probability() const { return cross.value_or(affinity / 10.0); }
};

inline nlohmann::json to_json(const SynthParams& p) {
    return {{"n_users", p.n_users},     {"n_items", p.n_items},         {"n_bundles", p.n_bundles},
            {"groups", p.groups},       {"bundle_size", p.bundle_size}, {"affinity", p.affinity},
            {"cross", p.cross_probability()}, {"seed", p.seed}};
}

struct SynthResult {
    Dataset dataset;
    std::vector<std::size_t> user_group, item_group, bundle_group;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::size_t> assign_groups(std::size_t n, std::size_t groups, nn::Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> g(n);
    for (std::size_t k = 0; k < n; ++k) g[order[k]] = k % groups;
    return g;
}

}  // namespace detail

inline SynthResult synth_blockmodel(const SynthParams& p) {
    const double cross = p.cross_probability();
    if (p.groups < 2) throw ParameterError("synth: need at least 2 groups");
    if (!(p.affinity > cross)) throw ParameterError("synth: affinity must exceed the cross-group probability");
    if (p.affinity > 1.0 || cross < 0.0) throw ParameterError("synth: probabilities must lie in [0, 1]");
    if (p.bundle_size == 0) throw ParameterError("synth: bundle_size must be positive");
    Catalog cat{p.n_users, p.n_bundles, p.n_items};
    cat.validate();

    nn::Rng root(p.seed);
    nn::Rng group_rng = root.split(1), y_rng = root.split(2), z_rng = root.split(3), x_rng = root.split(4);
    SynthResult out;
    out.user_group = detail::assign_groups(p.n_users, p.groups, group_rng);
    out.item_group = detail::assign_groups(p.n_items, p.groups, group_rng);
    out.bundle_group = detail::assign_groups(p.n_bundles, p.groups, group_rng);

    std::vector<std::vector<Id>> items_of_group(p.groups);
    for (Id i = 0; i < p.n_items; ++i) items_of_group[out.item_group[i]].push_back(i);
    for (std::size_t g = 0; g < p.groups; ++g)
        if (items_of_group[g].size() < p.bundle_size)
            throw ParameterError("synth: group " + std::to_string(g) + " has fewer items than bundle_size");

    std::vector<Pair> y;
    for (Id u = 0; u < p.n_users; ++u)
        for (Id i = 0; i < p.n_items; ++i) {
            const double prob = out.user_group[u] == out.item_group[i] ? p.affinity : cross;
            if (y_rng.uniform() < prob) y.emplace_back(u, i);
        }

    std::vector<Pair> z;
    for (Id b = 0; b < p.n_bundles; ++b) {
        auto pool = items_of_group[out.bundle_group[b]];
        // partial Fisher-Yates: first bundle_size slots are the sample
        for (std::size_t k = 0; k < p.bundle_size; ++k) {
            const auto j = k + static_cast<std::size_t>(z_rng.index(pool.size() - k));
            std::swap(pool[k], pool[j]);
            z.emplace_back(b, pool[k]);
        }
    }

    std::vector<Pair> x;
    for (Id u = 0; u < p.n_users; ++u)
        for (Id b = 0; b < p.n_bundles; ++b) {
            const double prob = out.user_group[u] == out.bundle_group[b] ? p.affinity : cross;
            if (x_rng.uniform() < prob) x.emplace_back(u, b);
        }

    out.dataset = Dataset{cat, InteractionSet(InteractionKind::UserBundle, cat, std::move(x)),
                          InteractionSet(InteractionKind::UserItem, cat, std::move(y)),
                          InteractionSet(InteractionKind::BundleItem, cat, std::move(z))};
    const auto& d = out.dataset;
    std::size_t idle_users = 0, idle_bundles = 0, idle_items = 0;
    for (const auto& r : d.x.rows()) idle_users += r.empty() ? 1 : 0;
    for (const auto& c : d.x.cols()) idle_bundles += c.empty() ? 1 : 0;
    for (const auto& c : d.y.cols()) idle_items += c.empty() ? 1 : 0;
    if (idle_users) out.warnings.push_back(std::to_string(idle_users) + " users have no bundle interactions");
    if (idle_bundles) out.warnings.push_back(std::to_string(idle_bundles) + " bundles have no user interactions");
    if (idle_items) out.warnings.push_back(std::to_string(idle_items) + " items have no user interactions");
    return out;
}

}  // namespace modiffe::data
