#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "modiffe/error.hpp"

namespace modiffe::data {

using Id = std::uint32_t;

struct Catalog {
    std::size_t n_users = 0;
    std::size_t n_bundles = 0;
    std::size_t n_items = 0;

    void validate() const {
        if (n_users == 0 || n_bundles == 0 || n_items == 0) throw ParameterError("catalog counts must be positive");
    }
    bool operator==(const Catalog&) const = default;
};

enum class InteractionKind { UserBundle, UserItem, BundleItem };

inline const char* to_string(InteractionKind k) {
    switch (k) {
        case InteractionKind::UserBundle: return "user_bundle";
        case InteractionKind::UserItem: return "user_item";
        case InteractionKind::BundleItem: return "bundle_item";
    }
    return "?";
}

// Row/column extents of a relation kind within a catalog.
inline std::pair<std::size_t, std::size_t> extents(InteractionKind k, const Catalog& c) {
    switch (k) {
        case InteractionKind::UserBundle: return {c.n_users, c.n_bundles};
        case InteractionKind::UserItem: return {c.n_users, c.n_items};
        case InteractionKind::BundleItem: return {c.n_bundles, c.n_items};
    }
    return {0, 0};
}

using Pair = std::pair<Id, Id>;

// Sparse binary relation with both adjacency views. Pairs are kept sorted
// and unique; rows()[r] and cols()[c] are sorted neighbor lists.
class InteractionSet {
public:
    InteractionSet() = default;

    InteractionSet(InteractionKind kind, std::size_t n_rows, std::size_t n_cols, std::vector<Pair> pairs)
        : kind_(kind), n_rows_(n_rows), n_cols_(n_cols), pairs_(std::move(pairs)) {
        std::sort(pairs_.begin(), pairs_.end());
        pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
        row_adj_.assign(n_rows_, {});
        col_adj_.assign(n_cols_, {});
        for (const auto& [r, c] : pairs_) {
            if (r >= n_rows_ || c >= n_cols_)
                throw BoundsError(std::string(to_string(kind_)) + ": pair (" + std::to_string(r) + "," +
                                  std::to_string(c) + ") outside " + std::to_string(n_rows_) + "x" +
                                  std::to_string(n_cols_));
            row_adj_[r].push_back(c);
            col_adj_[c].push_back(r);
        }
        // pairs_ is sorted by (row, col) so rows are already ordered;
        // columns collect rows in increasing order as well.
    }

    InteractionSet(InteractionKind kind, const Catalog& catalog, std::vector<Pair> pairs)
        : InteractionSet(kind, extents(kind, catalog).first, extents(kind, catalog).second, std::move(pairs)) {}

    InteractionKind kind() const noexcept { return kind_; }
    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }

    const std::vector<Pair>& pairs() const noexcept { return pairs_; }
    const std::vector<std::vector<Id>>& rows() const noexcept { return row_adj_; }
    const std::vector<std::vector<Id>>& cols() const noexcept { return col_adj_; }

    bool contains(Id r, Id c) const {
        if (r >= n_rows_) return false;
        const auto& adj = row_adj_[r];
        return std::binary_search(adj.begin(), adj.end(), c);
    }

    bool operator==(const InteractionSet& o) const {
        return kind_ == o.kind_ && n_rows_ == o.n_rows_ && n_cols_ == o.n_cols_ && pairs_ == o.pairs_;
    }

private:
    InteractionKind kind_ = InteractionKind::UserBundle;
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<Pair> pairs_;
    std::vector<std::vector<Id>> row_adj_;
    std::vector<std::vector<Id>> col_adj_;
};

namespace detail {

inline bool parse_id(std::string_view s, Id& out) {
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out, 10);
    return ec == std::errc() && p == end;
}

}  // namespace detail

// Reads "<row>\t<col>" lines (LF, optional trailing CR tolerated). Blank
// lines are skipped.
inline std::vector<Pair> read_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Pair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        Id a = 0, b = 0;
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos ||
            !detail::parse_id(std::string_view(line).substr(0, tab), a) ||
            !detail::parse_id(std::string_view(line).substr(tab + 1), b)) {
            throw ParseError(path, lineno, "expected two tab-separated non-negative integers, got '" + line + "'");
        }
        pairs.emplace_back(a, b);
    }
    return pairs;
}

inline InteractionSet load_interactions(const std::string& path, InteractionKind kind, const Catalog& catalog) {
    return InteractionSet(kind, catalog, read_pairs(path));
}

inline void write_interactions(const InteractionSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& [r, c] : set.pairs()) out << r << '\t' << c << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace modiffe::data
