#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "modiffe/moe/experts.hpp"
#include "modiffe/nn/rng.hpp"

namespace modiffe::moe {

inline constexpr int kEmbed = 0;
inline constexpr int kDiff = 1;

// Softmax gate over {embedded, diffusion} experts of one view. The bias is
// what a zero (cold) feature sees.
struct ViewGateParams {
    Matrix weight = Matrix::Zero(2, 1);  // n_experts x feature_dim
    Vector bias = Vector::Zero(2);
};

// Tanh gate over the two views, fed the concatenated fused bundle reps.
struct OutputGateParams {
    Matrix weight;  // 2 x 2d
};

struct GateParams {
    ViewGateParams bint, iint;
    OutputGateParams out;
};

inline GateParams init_gates(Eigen::Index dim, std::uint64_t seed) {
    nn::Rng rng = nn::Rng(seed).split(0x6A7E);
    GateParams g;
    // View gates start uniform: a random W^v times a log-degree of ~3
    // saturates the softmax before training can move it.
    g.bint = ViewGateParams{};
    g.iint = ViewGateParams{};
    g.out.weight = nn::uniform_matrix(2, 2 * dim, 1.0 / std::sqrt(2.0 * static_cast<double>(dim)), rng);
    return g;
}

using GateWeights = std::array<double, 2>;  // {w_embed, w_diff}

inline GateWeights view_gate(const Vector& feature, const ViewGateParams& p) {
    if (feature.size() != p.weight.cols() || p.bias.size() != 2)
        throw ShapeError("view_gate: feature dimension mismatch");
    nn::require_finite(feature, "view_gate feature");
    const Vector logits = p.weight * feature + p.bias;
    const double top = logits.maxCoeff();
    const double e0 = std::exp(logits[0] - top), e1 = std::exp(logits[1] - top);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

inline GateWeights view_gate(double feature, const ViewGateParams& p) {
    return view_gate(Vector::Constant(1, feature), p);
}

inline Vector fuse(const Vector& r_embed, const Vector& r_diff, const GateWeights& w) {
    if (r_embed.size() != r_diff.size()) throw ShapeError("fuse: expert outputs differ in length");
    return w[kEmbed] * r_embed + w[kDiff] * r_diff;
}

// r^v = w_e r_e + w_d r_d with weights from the view gate.
inline Vector fuse_entity(const Vector& r_embed, const Vector& r_diff, double feature, const ViewGateParams& p) {
    return fuse(r_embed, r_diff, view_gate(feature, p));
}

inline std::array<double, 2> output_gate(const Vector& a_out, const OutputGateParams& p) {
    if (a_out.size() != p.weight.cols()) throw ShapeError("output_gate: feature dimension mismatch");
    const Vector g = (p.weight * a_out).array().tanh().matrix();
    return {g[0], g[1]};
}

// Everything needed to score one bundle, real or pseudo. The item layer is
// a list of (embedded, diffusion, feature) rows that are fused one by one
// and mean-pooled.
struct BundleParts {
    Vector bint_embed, bint_diff;
    double bint_feature = 0.0;
    Matrix item_embed, item_diff;  // m x d
    std::vector<double> item_feature;
};

inline BundleParts bundle_parts(const ExpertOutputs& ex, Id b) {
    BundleParts p;
    p.bint_embed = ex.bundle_embed.row(b).transpose();
    p.bint_diff = ex.bundle_diff.row(b).transpose();
    p.bint_feature = ex.bundle_feature[b];
    const auto& items = ex.bundle_items.at(b);
    if (items.empty()) throw ContractError("bundle " + std::to_string(b) + " has no items");
    p.item_embed.resize(static_cast<Eigen::Index>(items.size()), ex.dim());
    p.item_diff.resize(static_cast<Eigen::Index>(items.size()), ex.dim());
    for (std::size_t k = 0; k < items.size(); ++k) {
        p.item_embed.row(static_cast<Eigen::Index>(k)) = ex.item_embed.row(items[k]);
        p.item_diff.row(static_cast<Eigen::Index>(k)) = ex.item_diff.row(items[k]);
        p.item_feature.push_back(ex.item_feature[items[k]]);
    }
    return p;
}

struct FusedBundle {
    Vector bint, iint;                  // fused per-view reps
    GateWeights bint_weights{};
    std::vector<GateWeights> item_weights;
    std::array<double, 2> out{};        // output-gate weights per view
};

inline FusedBundle fuse_bundle(const BundleParts& p, const GateParams& g) {
    FusedBundle f;
    f.bint_weights = view_gate(p.bint_feature, g.bint);
    f.bint = fuse(p.bint_embed, p.bint_diff, f.bint_weights);
    f.iint = Vector::Zero(p.bint_embed.size());
    const auto m = p.item_embed.rows();
    for (Eigen::Index k = 0; k < m; ++k) {
        const GateWeights w = view_gate(p.item_feature[static_cast<std::size_t>(k)], g.iint);
        f.item_weights.push_back(w);
        f.iint += w[kEmbed] * p.item_embed.row(k).transpose() + w[kDiff] * p.item_diff.row(k).transpose();
    }
    f.iint /= static_cast<double>(m);
    Vector a(2 * f.bint.size());
    a << f.bint, f.iint;
    f.out = output_gate(a, g.out);
    return f;
}

// y = sum_v g_out(a)_v <r_u^v, r_b^v>
inline double predict(const Vector& user_bint, const Vector& user_iint, const FusedBundle& f) {
    return f.out[0] * user_bint.dot(f.bint) + f.out[1] * user_iint.dot(f.iint);
}

inline double predict(const ExpertOutputs& ex, const GateParams& g, Id u, Id b) {
    return predict(ex.user_bint.row(u).transpose(), ex.user_iint.row(u).transpose(), fuse_bundle(bundle_parts(ex, b), g));
}

struct GateGrads {
    Matrix bint, iint, out;
    Vector bint_bias, iint_bias;

    static GateGrads zeros_like(const GateParams& g) {
        return {Matrix::Zero(g.bint.weight.rows(), g.bint.weight.cols()),
                Matrix::Zero(g.iint.weight.rows(), g.iint.weight.cols()),
                Matrix::Zero(g.out.weight.rows(), g.out.weight.cols()), Vector::Zero(2), Vector::Zero(2)};
    }

    GateGrads& operator*=(double s) {
        bint *= s;
        iint *= s;
        out *= s;
        bint_bias *= s;
        iint_bias *= s;
        return *this;
    }
};

// Accumulates coef * dy/dW for one (user, bundle) prediction.
inline void accumulate_predict_grad(const Vector& user_bint, const Vector& user_iint, const BundleParts& p,
                                    const FusedBundle& f, const GateParams& g, double coef, GateGrads& grads) {
    const Eigen::Index d = f.bint.size();
    const std::array<double, 2> s{user_bint.dot(f.bint), user_iint.dot(f.iint)};
    Vector a(2 * d);
    a << f.bint, f.iint;
    Vector d_pre(2);
    for (int v = 0; v < 2; ++v) d_pre[v] = coef * s[static_cast<std::size_t>(v)] * (1.0 - f.out[static_cast<std::size_t>(v)] * f.out[static_cast<std::size_t>(v)]);
    grads.out += d_pre * a.transpose();
    const Vector d_a = g.out.weight.transpose() * d_pre;
    const Vector d_bint = coef * f.out[0] * user_bint + d_a.head(d);
    const Vector d_iint = coef * f.out[1] * user_iint + d_a.tail(d);

    // softmax: d r / d z_k = w_k (r_k - r)
    for (int k = 0; k < 2; ++k) {
        const Vector& r_k = k == kEmbed ? p.bint_embed : p.bint_diff;
        const double dz = f.bint_weights[static_cast<std::size_t>(k)] * d_bint.dot(r_k - f.bint);
        grads.bint(k, 0) += dz * p.bint_feature;
        grads.bint_bias[k] += dz;
    }
    const auto m = p.item_embed.rows();
    const Vector d_item = d_iint / static_cast<double>(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& w = f.item_weights[static_cast<std::size_t>(i)];
        const Vector fused = w[kEmbed] * p.item_embed.row(i).transpose() + w[kDiff] * p.item_diff.row(i).transpose();
        const double feat = p.item_feature[static_cast<std::size_t>(i)];
        const double dz_e = w[kEmbed] * d_item.dot(p.item_embed.row(i).transpose() - fused);
        const double dz_d = w[kDiff] * d_item.dot(p.item_diff.row(i).transpose() - fused);
        grads.iint(kEmbed, 0) += dz_e * feat;
        grads.iint(kDiff, 0) += dz_d * feat;
        grads.iint_bias[kEmbed] += dz_e;
        grads.iint_bias[kDiff] += dz_d;
    }
}

// Fused reps and output-gate weights for every real bundle.
struct FusedTable {
    Matrix bint, iint;  // bundles x d
    Matrix out;         // bundles x 2
    Matrix bint_weights;  // bundles x 2
    Matrix item_weights;  // items x 2
};

inline FusedTable fuse_all(const ExpertOutputs& ex, const GateParams& g) {
    const auto nb = static_cast<Eigen::Index>(ex.n_bundles());
    FusedTable t{Matrix(nb, ex.dim()), Matrix(nb, ex.dim()), Matrix(nb, 2), Matrix(nb, 2),
                 Matrix(ex.item_embed.rows(), 2)};
    for (Eigen::Index i = 0; i < ex.item_embed.rows(); ++i) {
        const auto w = view_gate(ex.item_feature[i], g.iint);
        t.item_weights(i, 0) = w[0];
        t.item_weights(i, 1) = w[1];
    }
    for (Eigen::Index b = 0; b < nb; ++b) {
        const FusedBundle f = fuse_bundle(bundle_parts(ex, static_cast<Id>(b)), g);
        t.bint.row(b) = f.bint.transpose();
        t.iint.row(b) = f.iint.transpose();
        t.out(b, 0) = f.out[0];
        t.out(b, 1) = f.out[1];
        t.bint_weights(b, 0) = f.bint_weights[0];
        t.bint_weights(b, 1) = f.bint_weights[1];
    }
    return t;
}

// users x bundles prediction matrix of the full model.
inline Matrix moe_scores(const ExpertOutputs& ex, const GateParams& g) {
    const FusedTable t = fuse_all(ex, g);
    Matrix sb = ex.user_bint * t.bint.transpose();
    Matrix si = ex.user_iint * t.iint.transpose();
    for (Eigen::Index b = 0; b < sb.cols(); ++b) {
        sb.col(b) *= t.out(b, 0);
        si.col(b) *= t.out(b, 1);
    }
    return sb + si;
}

}  // namespace modiffe::moe
