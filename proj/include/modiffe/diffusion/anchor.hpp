#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "modiffe/data/interactions.hpp"
#include "modiffe/nn/matrix.hpp"

namespace modiffe::diffusion {

using data::Id;
using nn::Matrix;
using nn::Vector;

// Warm entities of one layer with their binary composition vectors (as
// sorted id lists) and embedded representations.
struct AnchorIndex {
    std::vector<Id> warm;                      // ascending
    std::vector<std::vector<Id>> composition;  // every entity of the layer
    Matrix reps;                               // every entity; only warm rows are read
};

// Bundles are described by their member items (rows of Z).
inline AnchorIndex bundle_anchor_index(const data::InteractionSet& z, std::vector<Id> warm_bundles,
                                       const Matrix& bundle_reps) {
    std::sort(warm_bundles.begin(), warm_bundles.end());
    return AnchorIndex{std::move(warm_bundles), z.rows(), bundle_reps};
}

// Items are described by the bundles that contain them (columns of Z).
inline AnchorIndex item_anchor_index(const data::InteractionSet& z, std::vector<Id> warm_items, const Matrix& item_reps) {
    std::sort(warm_items.begin(), warm_items.end());
    return AnchorIndex{std::move(warm_items), z.cols(), item_reps};
}

// Cosine similarity of two binary vectors given as sorted id lists.
inline double binary_cosine(const std::vector<Id>& a, const std::vector<Id>& b) {
    if (a.empty() || b.empty()) return 0.0;
    std::size_t common = 0;
    for (auto i = a.begin(), j = b.begin(); i != a.end() && j != b.end();) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else ++common, ++i, ++j;
    }
    return static_cast<double>(common) / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

struct Anchor {
    Vector value;
    std::vector<Id> neighbors;  // empty when the fallback was used
    bool fallback = false;
};

// Mean embedded representation of the n warm entities (other than
// `entity`) most similar in composition; ties go to the lower id. An
// entity with an empty composition gets the mean of all warm entities.
inline Anchor anchor(Id entity, const AnchorIndex& idx, std::size_t n) {
    if (idx.warm.empty()) throw ContractError("anchor: index has no warm entities");
    if (n == 0) throw ParameterError("anchor: n must be at least 1");
    Anchor out;
    const auto& query = idx.composition.at(entity);
    if (query.empty()) {
        out.fallback = true;
        out.value = Vector::Zero(idx.reps.cols());
        for (Id w : idx.warm) out.value += idx.reps.row(w).transpose();
        out.value /= static_cast<double>(idx.warm.size());
        return out;
    }
    std::vector<std::pair<double, Id>> scored;
    scored.reserve(idx.warm.size());
    for (Id w : idx.warm)
        if (w != entity) scored.emplace_back(binary_cosine(query, idx.composition[w]), w);
    if (scored.empty()) throw ContractError("anchor: no warm candidate other than the query");
    const std::size_t keep = std::min(n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    out.value = Vector::Zero(idx.reps.cols());
    for (std::size_t k = 0; k < keep; ++k) {
        out.neighbors.push_back(scored[k].second);
        out.value += idx.reps.row(scored[k].second).transpose();
    }
    out.value /= static_cast<double>(keep);
    return out;
}

}  // namespace modiffe::diffusion
