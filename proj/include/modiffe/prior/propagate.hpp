#pragma once

#include "modiffe/data/interactions.hpp"
#include "modiffe/prior/graph.hpp"

namespace modiffe::prior {

enum class View { Bint, Iint };

inline const char* to_string(View v) { return v == View::Bint ? "bint" : "iint"; }

struct ViewEmbeddings {
    View view = View::Bint;
    Matrix user_rep;    // left side
    Matrix entity_rep;  // bundles for Bint, items for Iint
    int layers = 0;
};

// LightGCN propagation over a bipartite graph:
//   left^(k)  = A  right^(k-1),   right^(k) = A^T left^(k-1)
//   rep       = (1/K) * sum_{k=0..K} layer^(k)
// The pooling factor is 1/K over K+1 layers, as in the reference formula.
inline ViewEmbeddings propagate(const BipartiteGraph& g, const Matrix& e_left, const Matrix& e_right, int layers,
                                View view = View::Bint) {
    if (layers < 1) throw ParameterError("propagate: K must be at least 1");
    if (e_left.cols() != e_right.cols()) throw ShapeError("propagate: embedding dimensions differ");
    nn::require_shape(e_left, static_cast<Eigen::Index>(g.left_count), e_left.cols(), "propagate left");
    nn::require_shape(e_right, static_cast<Eigen::Index>(g.right_count), e_right.cols(), "propagate right");
    nn::require_finite(e_left, "propagate left");
    nn::require_finite(e_right, "propagate right");

    Matrix left = e_left, right = e_right;
    Matrix sum_left = e_left, sum_right = e_right;
    for (int k = 1; k <= layers; ++k) {
        Matrix next_left = spmm_left(g, right);
        Matrix next_right = spmm_right(g, left);
        left = std::move(next_left);
        right = std::move(next_right);
        sum_left += left;
        sum_right += right;
    }
    const double scale = 1.0 / static_cast<double>(layers);
    return ViewEmbeddings{view, sum_left * scale, sum_right * scale, layers};
}

// Propagation is multiplication by the symmetric block operator
// (1/K) sum_k [[0, A], [A^T, 0]]^k, so its adjoint is itself: gradients
// with respect to the initial tables are the propagated output gradients.
inline ViewEmbeddings propagate_backward(const BipartiteGraph& g, const Matrix& grad_left_rep,
                                         const Matrix& grad_right_rep, int layers) {
    return propagate(g, grad_left_rep, grad_right_rep, layers);
}

// r_b = mean over i in C_b of r_i.
inline Matrix aggregate_items(const Matrix& item_rep, const data::InteractionSet& z) {
    if (z.kind() != data::InteractionKind::BundleItem) throw ParameterError("aggregate_items: expected bundle-item set");
    nn::require_shape(item_rep, static_cast<Eigen::Index>(z.n_cols()), item_rep.cols(), "aggregate_items");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(z.n_rows()), item_rep.cols());
    for (Id b = 0; b < z.n_rows(); ++b) {
        const auto& items = z.rows()[b];
        if (items.empty()) throw ContractError("aggregate_items: bundle " + std::to_string(b) + " has no items");
        for (Id i : items) out.row(b) += item_rep.row(i);
        out.row(b) /= static_cast<double>(items.size());
    }
    return out;
}

inline Matrix aggregate_items_backward(const Matrix& grad_bundle, const data::InteractionSet& z) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(z.n_cols()), grad_bundle.cols());
    for (Id b = 0; b < z.n_rows(); ++b) {
        const auto& items = z.rows()[b];
        if (items.empty()) continue;
        const double w = 1.0 / static_cast<double>(items.size());
        for (Id i : items) out.row(i) += w * grad_bundle.row(b);
    }
    return out;
}

}  // namespace modiffe::prior
