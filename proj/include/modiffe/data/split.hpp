#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/data/dataset.hpp"
#include "modiffe/nn/rng.hpp"

namespace modiffe::data {

enum class Scenario { ColdStart, AllBundle, WarmStart };
enum class Temperature : std::uint8_t { Warm = 0, Cold = 1 };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::ColdStart: return "cold";
        case Scenario::AllBundle: return "all";
        case Scenario::WarmStart: return "warm";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& s) {
    if (s == "cold" || s == "cold_start" || s == "ColdStart") return Scenario::ColdStart;
    if (s == "all" || s == "all_bundle" || s == "AllBundle") return Scenario::AllBundle;
    if (s == "warm" || s == "warm_start" || s == "WarmStart") return Scenario::WarmStart;
    throw ParameterError("unknown scenario '" + s + "' (expected cold, all or warm)");
}

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct ScenarioSplit {
    Scenario scenario = Scenario::ColdStart;
    Catalog catalog;
    InteractionSet train_x, val_x, test_x;
    InteractionSet y_train;  // all of Y; only bundles are held out
    InteractionSet z;
    std::vector<Temperature> bundle_bint;
    std::vector<Temperature> bundle_iint;
    std::vector<Temperature> item_label;
    std::vector<double> cold_item_ratio;

    bool bint_cold(Id b) const { return bundle_bint[b] == Temperature::Cold; }
    bool iint_cold(Id b) const { return bundle_iint[b] == Temperature::Cold; }
    bool item_cold(Id i) const { return item_label[i] == Temperature::Cold; }

    std::vector<Id> bundles_with(Temperature bint) const {
        std::vector<Id> out;
        for (Id b = 0; b < bundle_bint.size(); ++b)
            if (bundle_bint[b] == bint) out.push_back(b);
        return out;
    }
    std::vector<Id> items_with(Temperature t) const {
        std::vector<Id> out;
        for (Id i = 0; i < item_label.size(); ++i)
            if (item_label[i] == t) out.push_back(i);
        return out;
    }
};

// Recomputes every warm/cold label from the train portion.
inline void compute_labels(ScenarioSplit& s) {
    const auto& cat = s.catalog;
    s.bundle_bint.assign(cat.n_bundles, Temperature::Cold);
    for (Id b = 0; b < cat.n_bundles; ++b)
        if (!s.train_x.cols()[b].empty()) s.bundle_bint[b] = Temperature::Warm;
    s.item_label.assign(cat.n_items, Temperature::Cold);
    for (Id i = 0; i < cat.n_items; ++i)
        if (!s.y_train.cols()[i].empty()) s.item_label[i] = Temperature::Warm;
    s.bundle_iint.assign(cat.n_bundles, Temperature::Warm);
    s.cold_item_ratio.assign(cat.n_bundles, 0.0);
    for (Id b = 0; b < cat.n_bundles; ++b) {
        const auto& items = s.z.rows()[b];
        std::size_t cold = 0;
        for (Id i : items) cold += s.item_cold(i) ? 1 : 0;
        if (cold > 0) s.bundle_iint[b] = Temperature::Cold;
        s.cold_item_ratio[b] = items.empty() ? 0.0 : static_cast<double>(cold) / static_cast<double>(items.size());
    }
}

namespace detail {

inline std::size_t round_count(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

inline std::vector<Id> bundles_with_interactions(const InteractionSet& x) {
    std::vector<Id> out;
    for (Id b = 0; b < x.n_cols(); ++b)
        if (!x.cols()[b].empty()) out.push_back(b);
    return out;
}

}  // namespace detail

// Seeded 7:1:2-style split of X under one of the three scenarios:
//  - WarmStart: interactions are split uniformly at random.
//  - ColdStart: the bundle set is split; a held-out bundle sends all of its
//    interactions to val or test.
//  - AllBundle: val and test each take half of their interactions from
//    held-out bundles and half from the remaining bundles. Whole bundles
//    are held out until the cold half is reached, so the cold side may
//    overshoot by part of one bundle.
// Y stays entirely in train.
inline ScenarioSplit make_split(const InteractionSet& x, const InteractionSet& y, const InteractionSet& z,
                                Scenario scenario, SplitRatios ratios, std::uint64_t seed) {
    if (x.empty()) throw DegenerateSplitError("make_split: X is empty");
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9 || ratios.train < 0 || ratios.val < 0 ||
        ratios.test < 0)
        throw ParameterError("make_split: ratios must be non-negative and sum to 1");
    if (x.kind() != InteractionKind::UserBundle || y.kind() != InteractionKind::UserItem ||
        z.kind() != InteractionKind::BundleItem)
        throw ParameterError("make_split: expected X, Y, Z relations in that order");

    ScenarioSplit s;
    s.scenario = scenario;
    s.catalog = Catalog{x.n_rows(), x.n_cols(), y.n_cols()};
    s.y_train = y;
    s.z = z;

    nn::Rng rng = nn::Rng(seed).split(static_cast<std::uint64_t>(scenario) + 1);
    std::vector<Pair> train, val, test;
    const auto& pairs = x.pairs();

    switch (scenario) {
        case Scenario::WarmStart: {
            std::vector<Pair> shuffled = pairs;
            rng.shuffle(std::span<Pair>(shuffled));
            const std::size_t n_test = detail::round_count(ratios.test, shuffled.size());
            const std::size_t n_val = detail::round_count(ratios.val, shuffled.size());
            for (std::size_t k = 0; k < shuffled.size(); ++k)
                (k < n_test ? test : k < n_test + n_val ? val : train).push_back(shuffled[k]);
            break;
        }
        case Scenario::ColdStart: {
            auto bundles = detail::bundles_with_interactions(x);
            rng.shuffle(std::span<Id>(bundles));
            const std::size_t n_test = detail::round_count(ratios.test, bundles.size());
            const std::size_t n_val = detail::round_count(ratios.val, bundles.size());
            std::vector<std::uint8_t> where(x.n_cols(), 0);  // 0 train, 1 val, 2 test
            for (std::size_t k = 0; k < bundles.size(); ++k)
                where[bundles[k]] = k < n_test ? 2 : k < n_test + n_val ? 1 : 0;
            for (const auto& p : pairs) (where[p.second] == 2 ? test : where[p.second] == 1 ? val : train).push_back(p);
            break;
        }
        case Scenario::AllBundle: {
            const std::size_t n_test = detail::round_count(ratios.test, pairs.size());
            const std::size_t n_val = detail::round_count(ratios.val, pairs.size());
            const std::size_t cold_test = (n_test + 1) / 2;
            const std::size_t cold_val = (n_val + 1) / 2;
            auto bundles = detail::bundles_with_interactions(x);
            rng.shuffle(std::span<Id>(bundles));
            std::vector<std::uint8_t> where(x.n_cols(), 0);
            std::size_t k = 0, taken = 0;
            for (; k < bundles.size() && taken < cold_test; ++k) {
                where[bundles[k]] = 2;
                taken += x.cols()[bundles[k]].size();
            }
            taken = 0;
            for (; k < bundles.size() && taken < cold_val; ++k) {
                where[bundles[k]] = 1;
                taken += x.cols()[bundles[k]].size();
            }
            std::vector<Pair> warm;
            for (const auto& p : pairs) {
                if (where[p.second] == 2) test.push_back(p);
                else if (where[p.second] == 1) val.push_back(p);
                else warm.push_back(p);
            }
            rng.shuffle(std::span<Pair>(warm));
            const std::size_t warm_test = std::min(n_test / 2, warm.size());
            const std::size_t warm_val = std::min(n_val / 2, warm.size() - warm_test);
            for (std::size_t j = 0; j < warm.size(); ++j)
                (j < warm_test ? test : j < warm_test + warm_val ? val : train).push_back(warm[j]);
            break;
        }
    }
    if (train.empty() || test.empty())
        throw DegenerateSplitError(std::string("make_split: scenario '") + to_string(scenario) +
                                   "' produced an empty " + (train.empty() ? "train" : "test") + " set");
    s.train_x = InteractionSet(InteractionKind::UserBundle, s.catalog, std::move(train));
    s.val_x = InteractionSet(InteractionKind::UserBundle, s.catalog, std::move(val));
    s.test_x = InteractionSet(InteractionKind::UserBundle, s.catalog, std::move(test));
    compute_labels(s);
    return s;
}

inline ScenarioSplit make_split(const Dataset& d, Scenario scenario, std::uint64_t seed, SplitRatios ratios = {}) {
    return make_split(d.x, d.y, d.z, scenario, ratios, seed);
}

// Dual-level cold situations indexed [bint][iint] with 0 = warm, 1 = cold.
struct ColdStats {
    std::size_t n_bundles = 0;
    std::size_t n_test = 0;
    std::array<std::array<std::size_t, 2>, 2> count{};
    std::array<std::array<double, 2>, 2> ratio{};              // of all bundles
    std::array<std::array<double, 2>, 2> ratio_within_bint{};  // of the bint class
    std::array<std::array<std::size_t, 2>, 2> test_interactions{};
    std::array<std::array<double, 2>, 2> test_share{};
    std::size_t n_cold_items = 0;
};

inline ColdStats cold_stats(const ScenarioSplit& s) {
    ColdStats st;
    st.n_bundles = s.catalog.n_bundles;
    st.n_test = s.test_x.size();
    for (Id b = 0; b < s.catalog.n_bundles; ++b)
        ++st.count[static_cast<int>(s.bundle_bint[b])][static_cast<int>(s.bundle_iint[b])];
    for (const auto& [u, b] : s.test_x.pairs())
        ++st.test_interactions[static_cast<int>(s.bundle_bint[b])][static_cast<int>(s.bundle_iint[b])];
    for (int i = 0; i < 2; ++i) {
        const std::size_t row = st.count[i][0] + st.count[i][1];
        for (int j = 0; j < 2; ++j) {
            st.ratio[i][j] = st.n_bundles ? double(st.count[i][j]) / double(st.n_bundles) : 0.0;
            st.ratio_within_bint[i][j] = row ? double(st.count[i][j]) / double(row) : 0.0;
            st.test_share[i][j] = st.n_test ? double(st.test_interactions[i][j]) / double(st.n_test) : 0.0;
        }
    }
    for (auto t : s.item_label) st.n_cold_items += t == Temperature::Cold ? 1 : 0;
    return st;
}

inline const char* situation_name(int bint, int iint) {
    static const char* names[2][2] = {{"bint_warm&iint_warm", "bint_warm&iint_cold"},
                                      {"bint_cold&iint_warm", "bint_cold&iint_cold"}};
    return names[bint][iint];
}

inline nlohmann::json to_json(const ColdStats& st) {
    nlohmann::json sets = nlohmann::json::array();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            sets.push_back({{"situation", situation_name(i, j)},
                            {"bundles", st.count[i][j]},
                            {"ratio", st.ratio[i][j]},
                            {"ratio_within_bint", st.ratio_within_bint[i][j]},
                            {"test_interactions", st.test_interactions[i][j]},
                            {"test_share", st.test_share[i][j]}});
    return {{"n_bundles", st.n_bundles}, {"n_test", st.n_test}, {"n_cold_items", st.n_cold_items}, {"sets", sets}};
}

inline constexpr const char* kLabelsFile = "labels.json";

// train.tsv, val.tsv, test.tsv and labels.json in `dir`.
inline void save_split(const ScenarioSplit& s, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    write_interactions(s.train_x, (root / "train.tsv").string());
    write_interactions(s.val_x, (root / "val.tsv").string());
    write_interactions(s.test_x, (root / "test.tsv").string());
    nlohmann::json labels = {{"bint_cold", s.bundles_with(Temperature::Cold)},
                             {"item_cold", s.items_with(Temperature::Cold)}};
    std::ofstream out(root / kLabelsFile, std::ios::binary);
    out << labels.dump() << '\n';
}

inline ScenarioSplit load_split(const Dataset& d, Scenario scenario, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    ScenarioSplit s;
    s.scenario = scenario;
    s.catalog = d.catalog;
    s.y_train = d.y;
    s.z = d.z;
    s.train_x = load_interactions((root / "train.tsv").string(), InteractionKind::UserBundle, d.catalog);
    s.val_x = load_interactions((root / "val.tsv").string(), InteractionKind::UserBundle, d.catalog);
    s.test_x = load_interactions((root / "test.tsv").string(), InteractionKind::UserBundle, d.catalog);
    compute_labels(s);
    if (fs::exists(root / kLabelsFile)) {
        std::ifstream in(root / kLabelsFile);
        nlohmann::json j;
        in >> j;
        if (j.at("bint_cold").get<std::vector<Id>>() != s.bundles_with(Temperature::Cold) ||
            j.at("item_cold").get<std::vector<Id>>() != s.items_with(Temperature::Cold))
            throw ContractError(dir + ": labels.json disagrees with labels recomputed from train.tsv");
    }
    return s;
}

}  // namespace modiffe::data
