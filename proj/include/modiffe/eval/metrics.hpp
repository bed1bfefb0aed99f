#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/data/split.hpp"
#include "modiffe/nn/matrix.hpp"

namespace modiffe::eval {

using data::Id;

// Hits among the first k ranked ids divided by |positives|.
inline double recall_at_k(std::span<const Id> ranked, std::span<const Id> positives, std::size_t k) {
    if (k == 0) throw ParameterError("recall_at_k: k must be positive");
    if (positives.empty()) throw ContractError("recall_at_k: empty positive set");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
        hits += std::find(positives.begin(), positives.end(), ranked[r]) != positives.end() ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(positives.size());
}

// Binary-relevance NDCG with the ideal list truncated at min(k, |positives|).
inline double ndcg_at_k(std::span<const Id> ranked, std::span<const Id> positives, std::size_t k) {
    if (k == 0) throw ParameterError("ndcg_at_k: k must be positive");
    if (positives.empty()) throw ContractError("ndcg_at_k: empty positive set");
    double dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
        if (std::find(positives.begin(), positives.end(), ranked[r]) != positives.end())
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, positives.size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

// Top-k candidate ids by descending score, ties by ascending id. Ids with
// masked[id] set are never returned.
inline std::vector<Id> rank_top_k(std::span<const double> scores, const std::vector<bool>& masked, std::size_t k) {
    std::vector<Id> candidates;
    candidates.reserve(scores.size());
    for (Id b = 0; b < scores.size(); ++b)
        if (!masked[b]) candidates.push_back(b);
    auto better = [&](Id a, Id b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    const std::size_t keep = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better);
    candidates.resize(keep);
    return candidates;
}

enum class Target { Val, Test };

// Which test positives count. Candidates are always every bundle the user
// has no train interaction with.
enum class BundleFilter { All, BintCold, BintWarm };

inline const char* to_string(BundleFilter f) {
    switch (f) {
        case BundleFilter::All: return "all";
        case BundleFilter::BintCold: return "bint_cold";
        case BundleFilter::BintWarm: return "bint_warm";
    }
    return "?";
}

struct MetricReport {
    std::size_t k = 20;
    double recall = 0.0;
    double ndcg = 0.0;
    std::size_t users = 0;       // users with >= 1 counted positive
    std::size_t candidates = 0;  // mean candidate count, rounded down
    double mean_candidates = 0.0;
    double random_recall = 0.0;  // mean of min(1, k / candidates_u)
    BundleFilter filter = BundleFilter::All;
    std::array<std::array<std::size_t, 2>, 2> hits{};  // [bint][iint], 0 = warm
    std::size_t total_hits = 0;

    // Expected Recall@k of a uniformly random ranking over the same users.
    double random_baseline() const { return random_recall; }
};

// Ranks all unmasked bundles for every user and averages Recall@k and
// NDCG@k over users with at least one counted positive. `score_user(u, out)`
// fills out[b] for every bundle.
inline MetricReport evaluate(const std::function<void(Id, std::span<double>)>& score_user,
                             const data::ScenarioSplit& split, std::size_t k = 20, Target target = Target::Test,
                             BundleFilter filter = BundleFilter::All) {
    const auto& truth = target == Target::Test ? split.test_x : split.val_x;
    const std::size_t n_bundles = split.catalog.n_bundles;
    MetricReport rep;
    rep.k = k;
    rep.filter = filter;
    std::vector<double> scores(n_bundles);
    std::vector<bool> masked(n_bundles);
    double recall_sum = 0.0, ndcg_sum = 0.0, candidate_sum = 0.0, random_sum = 0.0;
    for (Id u = 0; u < split.catalog.n_users; ++u) {
        std::vector<Id> positives;
        for (Id b : truth.rows()[u]) {
            if (filter == BundleFilter::BintCold && !split.bint_cold(b)) continue;
            if (filter == BundleFilter::BintWarm && split.bint_cold(b)) continue;
            positives.push_back(b);
        }
        if (positives.empty()) continue;
        std::fill(masked.begin(), masked.end(), false);
        for (Id b : split.train_x.rows()[u]) masked[b] = true;
        score_user(u, scores);
        const auto ranked = rank_top_k(scores, masked, k);
        for (Id b : ranked)
            if (split.train_x.contains(u, b)) throw ContractError("evaluate: train positive leaked into ranking");
        recall_sum += recall_at_k(ranked, positives, k);
        ndcg_sum += ndcg_at_k(ranked, positives, k);
        const auto n_candidates = static_cast<double>(n_bundles - split.train_x.rows()[u].size());
        candidate_sum += n_candidates;
        random_sum += std::min(1.0, static_cast<double>(k) / n_candidates);
        for (Id b : ranked)
            if (std::find(positives.begin(), positives.end(), b) != positives.end()) {
                ++rep.hits[split.bint_cold(b) ? 1 : 0][split.iint_cold(b) ? 1 : 0];
                ++rep.total_hits;
            }
        ++rep.users;
    }
    if (rep.users > 0) {
        rep.recall = recall_sum / double(rep.users);
        rep.ndcg = ndcg_sum / double(rep.users);
        rep.mean_candidates = candidate_sum / double(rep.users);
        rep.candidates = static_cast<std::size_t>(rep.mean_candidates);
        rep.random_recall = random_sum / double(rep.users);
    }
    return rep;
}

// Scores from a dense users x bundles matrix.
inline MetricReport evaluate(const nn::Matrix& scores, const data::ScenarioSplit& split, std::size_t k = 20,
                             Target target = Target::Test, BundleFilter filter = BundleFilter::All) {
    nn::require_shape(scores, static_cast<Eigen::Index>(split.catalog.n_users),
                      static_cast<Eigen::Index>(split.catalog.n_bundles), "evaluate scores");
    return evaluate(
        [&](Id u, std::span<double> out) {
            for (Eigen::Index b = 0; b < scores.cols(); ++b) out[static_cast<std::size_t>(b)] = scores(u, b);
        },
        split, k, target, filter);
}

inline nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json hits = nlohmann::json::object();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) hits[data::situation_name(i, j)] = r.hits[i][j];
    return {{"k", r.k},
            {"recall", r.recall},
            {"ndcg", r.ndcg},
            {"users", r.users},
            {"averaging", "users with at least one counted test positive"},
            {"filter", to_string(r.filter)},
            {"mean_candidates", r.mean_candidates},
            {"random_baseline_recall", r.random_baseline()},
            {"hits", hits},
            {"total_hits", r.total_hits}};
}

}  // namespace modiffe::eval
