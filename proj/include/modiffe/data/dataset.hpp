#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/data/interactions.hpp"

namespace modiffe::data {

// The three relations of a bundle dataset over one catalog.
struct Dataset {
    Catalog catalog;
    InteractionSet x;  // user-bundle
    InteractionSet y;  // user-item
    InteractionSet z;  // bundle-item
};

inline constexpr const char* kUserBundleFile = "user_bundle.tsv";
inline constexpr const char* kUserItemFile = "user_item.tsv";
inline constexpr const char* kBundleItemFile = "bundle_item.tsv";
inline constexpr const char* kCatalogFile = "catalog.json";
inline constexpr const char* kIdMapFile = "idmap.tsv";

inline nlohmann::json to_json(const Catalog& c) {
    return {{"n_users", c.n_users}, {"n_bundles", c.n_bundles}, {"n_items", c.n_items}};
}

// Loads a dense-id dataset directory. Entity counts come from catalog.json
// when present, otherwise from the largest id seen plus one.
inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const auto xp = read_pairs((root / kUserBundleFile).string());
    const auto yp = read_pairs((root / kUserItemFile).string());
    const auto zp = read_pairs((root / kBundleItemFile).string());
    Catalog cat;
    if (fs::exists(root / kCatalogFile)) {
        std::ifstream in(root / kCatalogFile);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw IoError((root / kCatalogFile).string() + ": " + e.what());
        }
        cat.n_users = j.at("n_users").get<std::size_t>();
        cat.n_bundles = j.at("n_bundles").get<std::size_t>();
        cat.n_items = j.at("n_items").get<std::size_t>();
    } else {
        auto grow = [](std::size_t& n, Id v) { n = std::max<std::size_t>(n, std::size_t{v} + 1); };
        for (auto [u, b] : xp) grow(cat.n_users, u), grow(cat.n_bundles, b);
        for (auto [u, i] : yp) grow(cat.n_users, u), grow(cat.n_items, i);
        for (auto [b, i] : zp) grow(cat.n_bundles, b), grow(cat.n_items, i);
    }
    cat.validate();
    return Dataset{cat, InteractionSet(InteractionKind::UserBundle, cat, xp),
                   InteractionSet(InteractionKind::UserItem, cat, yp),
                   InteractionSet(InteractionKind::BundleItem, cat, zp)};
}

inline void save_dataset(const Dataset& d, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    write_interactions(d.x, (root / kUserBundleFile).string());
    write_interactions(d.y, (root / kUserItemFile).string());
    write_interactions(d.z, (root / kBundleItemFile).string());
    std::ofstream out(root / kCatalogFile, std::ios::binary);
    out << to_json(d.catalog).dump(2) << '\n';
}

// Raw-id densification. Raw ids are arbitrary tokens; dense ids are
// assigned per entity class in lexicographic order of the raw token so the
// mapping does not depend on line order.
struct IdMap {
    std::map<std::string, Id> users, bundles, items;
};

struct IngestResult {
    Dataset dataset;
    IdMap ids;
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> read_raw_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
            line.find('\t', tab + 1) != std::string::npos)
            throw ParseError(path, lineno, "expected two tab-separated fields");
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

inline void assign_dense(std::map<std::string, Id>& m) {
    Id next = 0;
    for (auto& [raw, id] : m) id = next++;
}

}  // namespace detail

inline IngestResult ingest_raw(const std::string& user_bundle, const std::string& user_item,
                               const std::string& bundle_item) {
    const auto xr = detail::read_raw_pairs(user_bundle);
    const auto yr = detail::read_raw_pairs(user_item);
    const auto zr = detail::read_raw_pairs(bundle_item);
    IdMap ids;
    for (const auto& [u, b] : xr) ids.users[u], ids.bundles[b];
    for (const auto& [u, i] : yr) ids.users[u], ids.items[i];
    for (const auto& [b, i] : zr) ids.bundles[b], ids.items[i];
    detail::assign_dense(ids.users);
    detail::assign_dense(ids.bundles);
    detail::assign_dense(ids.items);

    auto remap = [](const auto& raw, const auto& rows, const auto& cols) {
        std::vector<Pair> out;
        out.reserve(raw.size());
        for (const auto& [r, c] : raw) out.emplace_back(rows.at(r), cols.at(c));
        return out;
    };
    Catalog cat{ids.users.size(), ids.bundles.size(), ids.items.size()};
    cat.validate();
    Dataset d{cat, InteractionSet(InteractionKind::UserBundle, cat, remap(xr, ids.users, ids.bundles)),
              InteractionSet(InteractionKind::UserItem, cat, remap(yr, ids.users, ids.items)),
              InteractionSet(InteractionKind::BundleItem, cat, remap(zr, ids.bundles, ids.items))};
    return {std::move(d), std::move(ids)};
}

// "<entity_class>\t<raw_id>\t<dense_id>" per line, classes in the order
// user, bundle, item.
inline void write_idmap(const IdMap& ids, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    auto dump = [&](const char* cls, const std::map<std::string, Id>& m) {
        std::vector<std::pair<Id, const std::string*>> ordered;
        for (const auto& [raw, id] : m) ordered.emplace_back(id, &raw);
        std::sort(ordered.begin(), ordered.end());
        for (const auto& [id, raw] : ordered) out << cls << '\t' << *raw << '\t' << id << '\n';
    };
    dump("user", ids.users);
    dump("bundle", ids.bundles);
    dump("item", ids.items);
}

}  // namespace modiffe::data
