#pragma once

#include <cmath>
#include <vector>

#include "modiffe/data/split.hpp"
#include "modiffe/nn/matrix.hpp"

namespace modiffe::moe {

using data::Id;
using nn::Matrix;
using nn::Vector;

// Frozen outputs of every expert, precomputed before gate training. Users
// always use their embedded representations.
struct ExpertOutputs {
    Matrix user_bint, user_iint;
    Matrix bundle_embed, bundle_diff;  // bundle-level view, per bundle
    Matrix item_embed, item_diff;      // item-level view, per item
    Vector bundle_feature;             // log(1 + train user-bundle degree)
    Vector item_feature;               // log(1 + train user-item degree)
    std::vector<std::vector<Id>> bundle_items;

    Eigen::Index dim() const { return bundle_embed.cols(); }
    std::size_t n_users() const { return static_cast<std::size_t>(user_bint.rows()); }
    std::size_t n_bundles() const { return static_cast<std::size_t>(bundle_embed.rows()); }
};

// Cold-aware features: [log(1 + deg)], exactly 0 for view-cold entities.
inline Vector bundle_features(const data::ScenarioSplit& s) {
    Vector f(static_cast<Eigen::Index>(s.catalog.n_bundles));
    for (Id b = 0; b < s.catalog.n_bundles; ++b) f[b] = std::log1p(static_cast<double>(s.train_x.cols()[b].size()));
    return f;
}

inline Vector item_features(const data::ScenarioSplit& s) {
    Vector f(static_cast<Eigen::Index>(s.catalog.n_items));
    for (Id i = 0; i < s.catalog.n_items; ++i) f[i] = std::log1p(static_cast<double>(s.y_train.cols()[i].size()));
    return f;
}

}  // namespace modiffe::moe
