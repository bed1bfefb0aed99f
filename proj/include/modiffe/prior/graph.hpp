#pragma once

#include <cmath>
#include <vector>

#include "modiffe/data/interactions.hpp"
#include "modiffe/nn/matrix.hpp"

namespace modiffe::prior {

using data::Id;
using nn::Matrix;

// Symmetrically normalized bipartite adjacency in CSR form, stored from
// both sides. Entry (l, r) = 1 / sqrt(deg(l) * deg(r)).
struct BipartiteGraph {
    std::size_t left_count = 0;
    std::size_t right_count = 0;
    std::vector<std::size_t> left_offsets, right_offsets;
    std::vector<Id> left_neighbors, right_neighbors;
    std::vector<double> left_weights, right_weights;

    std::size_t edge_count() const { return left_neighbors.size(); }

    double entry(Id l, Id r) const {
        for (std::size_t k = left_offsets[l]; k < left_offsets[l + 1]; ++k)
            if (left_neighbors[k] == r) return left_weights[k];
        return 0.0;
    }
};

inline BipartiteGraph normalize_adjacency(const data::InteractionSet& edges) {
    BipartiteGraph g;
    g.left_count = edges.n_rows();
    g.right_count = edges.n_cols();
    const auto& rows = edges.rows();
    const auto& cols = edges.cols();
    auto inv_sqrt = [](std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d)); };

    g.left_offsets.assign(g.left_count + 1, 0);
    for (Id l = 0; l < g.left_count; ++l) {
        g.left_offsets[l + 1] = g.left_offsets[l] + rows[l].size();
        for (Id r : rows[l]) {
            g.left_neighbors.push_back(r);
            g.left_weights.push_back(inv_sqrt(rows[l].size()) * inv_sqrt(cols[r].size()));
        }
    }
    g.right_offsets.assign(g.right_count + 1, 0);
    for (Id r = 0; r < g.right_count; ++r) {
        g.right_offsets[r + 1] = g.right_offsets[r] + cols[r].size();
        for (Id l : cols[r]) {
            g.right_neighbors.push_back(l);
            g.right_weights.push_back(inv_sqrt(rows[l].size()) * inv_sqrt(cols[r].size()));
        }
    }
    return g;
}

// out = A * right  (left_count x d)
inline Matrix spmm_left(const BipartiteGraph& g, const Matrix& right) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(g.left_count), right.cols());
    for (std::size_t l = 0; l < g.left_count; ++l)
        for (std::size_t k = g.left_offsets[l]; k < g.left_offsets[l + 1]; ++k)
            out.row(static_cast<Eigen::Index>(l)) += g.left_weights[k] * right.row(g.left_neighbors[k]);
    return out;
}

// out = A^T * left  (right_count x d)
inline Matrix spmm_right(const BipartiteGraph& g, const Matrix& left) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(g.right_count), left.cols());
    for (std::size_t r = 0; r < g.right_count; ++r)
        for (std::size_t k = g.right_offsets[r]; k < g.right_offsets[r + 1]; ++k)
            out.row(static_cast<Eigen::Index>(r)) += g.right_weights[k] * left.row(g.right_neighbors[k]);
    return out;
}

}  // namespace modiffe::prior
