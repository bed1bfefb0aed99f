#include <gtest/gtest.h>

#include <cmath>

#include "modiffe/data/synth.hpp"
#include "modiffe/moe/stage3.hpp"
#include "modiffe/nn/gradcheck.hpp"
#include "support.hpp"

namespace {

using namespace modiffe;
using namespace modiffe::moe;
namespace mt = modiffe::testing;

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out[k++] = x;
    return out;
}

TEST(ViewGate, ZeroWeightsAreUniform) {
    const ViewGateParams p;
    for (double f : {0.0, 1.0, 7.5}) {
        const auto w = view_gate(f, p);
        EXPECT_EQ(w[kEmbed], 0.5);
        EXPECT_EQ(w[kDiff], 0.5);
    }
}

TEST(ViewGate, LargeBiasSaturates) {
    ViewGateParams p;
    p.bias = vec({20.0, -20.0});
    EXPECT_NEAR(view_gate(0.0, p)[kEmbed], 1.0, 1e-8);
    p.bias = vec({-20.0, 20.0});
    EXPECT_NEAR(view_gate(0.0, p)[kDiff], 1.0, 1e-8);
}

TEST(ViewGate, ScalarFeatureMatchesFrozenSoftmax) {
    ViewGateParams p;
    p.weight << 0.3, -0.2;
    p.bias = vec({0.1, 0.4});
    // logits 0.61 and 0.06
    const auto w = view_gate(1.7, p);
    EXPECT_NEAR(w[kEmbed], 0.6341355910108007, 1e-15);
    EXPECT_NEAR(w[kEmbed] + w[kDiff], 1.0, 1e-15);
}

TEST(ViewGate, WeightsStayOnTheSimplex) {
    nn::Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        ViewGateParams p;
        p.weight = nn::normal_matrix(2, 1, 10.0, rng);
        p.bias = nn::normal_matrix(2, 1, 10.0, rng);
        const auto w = view_gate(5.0 * rng.normal(), p);
        EXPECT_GE(w[0], 0.0);
        EXPECT_GE(w[1], 0.0);
        EXPECT_NEAR(w[0] + w[1], 1.0, 1e-15);
    }
}

TEST(Fuse, OneHotAndEqualExperts) {
    const Vector e = vec({1, 2, 3}), d = vec({-4, 0, 9});
    EXPECT_EQ(fuse(e, d, {1.0, 0.0}), e);
    EXPECT_EQ(fuse(e, d, {0.0, 1.0}), d);
    EXPECT_TRUE(fuse(e, e, {0.3, 0.7}).isApprox(e, 1e-15));
    const Vector mid = fuse(e, d, {0.25, 0.75});
    for (int j = 0; j < 3; ++j) {
        EXPECT_GE(mid[j], std::min(e[j], d[j]));
        EXPECT_LE(mid[j], std::max(e[j], d[j]));
    }
}

TEST(FuseBundle, ItemViewFusesPerItemThenPools) {
    GateParams g;
    g.iint.weight << 0.8, -0.5;
    g.iint.bias = vec({0.2, -0.1});
    g.out.weight = Matrix::Ones(2, 4);
    BundleParts p;
    p.bint_embed = vec({1, 0});
    p.bint_diff = vec({0, 1});
    p.item_embed.resize(3, 2);
    p.item_diff.resize(3, 2);
    p.item_embed << 1, 2, -1, 0.5, 3, 3;
    p.item_diff << 0, -2, 4, 1, -1, 1;
    p.item_feature = {0.0, 1.2, 2.5};
    Vector expected = Vector::Zero(2);
    for (int k = 0; k < 3; ++k) {
        const double f = p.item_feature[static_cast<std::size_t>(k)];
        const double ze = 0.8 * f + 0.2, zd = -0.5 * f - 0.1;
        const double we = std::exp(ze) / (std::exp(ze) + std::exp(zd));
        expected += we * p.item_embed.row(k).transpose() + (1 - we) * p.item_diff.row(k).transpose();
    }
    expected /= 3.0;
    EXPECT_LT((fuse_bundle(p, g).iint - expected).cwiseAbs().maxCoeff(), 1e-13);
}

BundleParts one_dim_bundle() {
    BundleParts p;
    p.bint_embed = vec({0.5});
    p.bint_diff = vec({1.5});
    p.item_embed = Matrix::Constant(1, 1, 1.0);
    p.item_diff = Matrix::Constant(1, 1, 3.0);
    p.item_feature = {0.0};
    return p;
}

TEST(Predict, ZeroOutputGateScoresZero) {
    GateParams g;
    g.out.weight = Matrix::Zero(2, 2);
    EXPECT_EQ(predict(vec({2}), vec({-1}), fuse_bundle(one_dim_bundle(), g)), 0.0);
}

TEST(Predict, HandEvaluatedOneDimensionalCase) {
    GateParams g;
    g.out.weight.resize(2, 2);
    g.out.weight << 0.5, 1.0, -1.0, 0.25;
    // fused bint = 1, iint = 2; gates tanh(2.5), tanh(-0.5)
    const auto f = fuse_bundle(one_dim_bundle(), g);
    EXPECT_NEAR(predict(vec({2}), vec({-1}), f), 2.89746291082288, 1e-14);
}

TEST(Predict, SaturatedOutputGateIsPlainSumOfViews) {
    GateParams g;
    g.out.weight = Matrix::Constant(2, 2, 50.0);
    const auto f = fuse_bundle(one_dim_bundle(), g);
    EXPECT_NEAR(predict(vec({2}), vec({-1}), f), 2.0 * 1.0 + (-1.0) * 2.0, 1e-6);
}

// Random expert outputs shaped like `s`.
ExpertOutputs random_experts(const data::ScenarioSplit& s, Eigen::Index dim, std::uint64_t seed) {
    nn::Rng rng(seed);
    const auto nu = static_cast<Eigen::Index>(s.catalog.n_users);
    const auto nb = static_cast<Eigen::Index>(s.catalog.n_bundles);
    const auto ni = static_cast<Eigen::Index>(s.catalog.n_items);
    ExpertOutputs ex;
    ex.user_bint = nn::normal_matrix(nu, dim, 0.5, rng);
    ex.user_iint = nn::normal_matrix(nu, dim, 0.5, rng);
    ex.bundle_embed = nn::normal_matrix(nb, dim, 0.5, rng);
    ex.bundle_diff = nn::normal_matrix(nb, dim, 0.5, rng);
    ex.item_embed = nn::normal_matrix(ni, dim, 0.5, rng);
    ex.item_diff = nn::normal_matrix(ni, dim, 0.5, rng);
    ex.bundle_feature = bundle_features(s);
    ex.item_feature = item_features(s);
    ex.bundle_items = s.z.rows();
    return ex;
}

data::ScenarioSplit small_split() {
    data::SynthParams p;
    p.n_users = 80;
    p.n_items = 120;
    p.n_bundles = 40;
    p.bundle_size = 5;
    return data::make_split(data::synth_blockmodel(p).dataset, data::Scenario::ColdStart, 2);
}

TEST(Predict, ScoreMatrixAgreesWithPointwisePredictions) {
    const auto s = small_split();
    const auto ex = random_experts(s, 4, 1);
    GateParams g = init_gates(4, 3);
    g.bint.weight << 0.4, -0.3;
    g.iint.bias = vec({0.2, -0.6});
    const Matrix scores = moe_scores(ex, g);
    for (Id u = 0; u < 5; ++u)
        for (Id b = 0; b < s.catalog.n_bundles; ++b) EXPECT_NEAR(scores(u, b), predict(ex, g, u, b), 1e-12);
}

TEST(Features, ColdEntitiesHaveZeroFeature) {
    const auto s = small_split();
    const Vector fb = bundle_features(s);
    for (Id b = 0; b < s.catalog.n_bundles; ++b) EXPECT_EQ(fb[b] == 0.0, s.bint_cold(b));
    const Vector fi = item_features(s);
    for (Id i = 0; i < s.catalog.n_items; ++i) EXPECT_EQ(fi[i] == 0.0, s.item_cold(i));
}

TEST(Pseudo, EndpointsAndMidpoint) {
    const auto s = small_split();
    const auto ex = random_experts(s, 3, 2);
    const auto warm = s.bundles_with(data::Temperature::Warm);
    const Id a = warm[0], b = warm[1];
    const auto p1 = interpolate_pseudo(a, b, 1.0, ex);
    EXPECT_EQ(p1.parts.bint_embed, Vector(ex.bundle_embed.row(a).transpose()));
    EXPECT_EQ(p1.parts.bint_diff, Vector(ex.bundle_diff.row(a).transpose()));
    const auto half = interpolate_pseudo(a, b, 0.5, ex);
    const Vector mid = 0.5 * (ex.bundle_embed.row(a) + ex.bundle_embed.row(b)).transpose();
    EXPECT_LT((half.parts.bint_embed - mid).cwiseAbs().maxCoeff(), 1e-15);
    const auto swapped = interpolate_pseudo(b, a, 0.5, ex);
    EXPECT_LT((half.parts.bint_embed - swapped.parts.bint_embed).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((half.parts.item_diff - swapped.parts.item_diff).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(half.parts.bint_feature, 0.0);
    EXPECT_EQ(half.parts.item_feature, std::vector<double>{0.0});
}

TEST(Pseudo, RejectsBadArguments) {
    const auto s = small_split();
    const auto ex = random_experts(s, 3, 2);
    EXPECT_THROW(interpolate_pseudo(0, 1, 1.5, ex), ParameterError);
    EXPECT_THROW(interpolate_pseudo(0, 1, -0.1, ex), ParameterError);
    EXPECT_THROW(interpolate_pseudo(0, 1, std::nan(""), ex), ParameterError);
    EXPECT_THROW(interpolate_pseudo(3, 3, 0.5, ex), ParameterError);
}

std::vector<prior::Triple> q_of_size(const data::ScenarioSplit& s, std::size_t n, nn::Rng& rng) {
    const auto warm = s.bundles_with(data::Temperature::Warm);
    std::vector<prior::Triple> q;
    while (q.size() < n) {
        for (const auto& t : prior::sample_triples(s.train_x, warm, rng)) q.push_back(t);
    }
    q.resize(n);
    return q;
}

TEST(Augment, SizeFollowsEta) {
    const auto s = small_split();
    const auto ex = random_experts(s, 3, 4);
    const auto warm = s.bundles_with(data::Temperature::Warm);
    nn::Rng rng(8);
    const auto q = q_of_size(s, 1000, rng);
    AugmentationStats st;
    EXPECT_TRUE(augment(s, ex, q, warm, 0.0, 0.9, rng, st).empty());
    const auto aug = augment(s, ex, q, warm, 0.5, 0.9, rng, st);
    EXPECT_EQ(aug.size(), 500u);
    EXPECT_EQ(st.q, 1000u);
    EXPECT_EQ(st.s, 500u);
    for (const auto& t : aug) {
        const auto& pos = std::get<PseudoBundle>(t.pos);
        const auto& neg = std::get<PseudoBundle>(t.neg);
        EXPECT_TRUE(s.train_x.contains(t.user, pos.source_x));
        EXPECT_TRUE(s.train_x.contains(t.user, pos.source_y));
        EXPECT_FALSE(s.train_x.contains(t.user, neg.source_x));
        EXPECT_FALSE(s.train_x.contains(t.user, neg.source_y));
        EXPECT_NE(pos.source_x, pos.source_y);
    }
}

TEST(GateLoss, GradientMatchesFiniteDifferencesWithPseudoTriples) {
    const auto s = small_split();
    const auto ex = random_experts(s, 3, 6);
    GateParams g = init_gates(3, 7);
    nn::Rng rng(9);
    g.bint.weight = nn::normal_matrix(2, 1, 0.5, rng);
    g.iint.weight = nn::normal_matrix(2, 1, 0.5, rng);
    g.bint.bias = nn::normal_matrix(2, 1, 0.5, rng);
    g.iint.bias = nn::normal_matrix(2, 1, 0.5, rng);
    const auto warm = s.bundles_with(data::Temperature::Warm);
    const auto q = q_of_size(s, 6, rng);
    AugmentationStats st;
    std::vector<GateTriple> triples = augment(s, ex, q, warm, 0.5, 0.9, rng, st);
    for (const auto& t : q) triples.push_back({t.user, t.pos, t.neg});
    // Cold bundles on both sides as well.
    const auto cold = s.bundles_with(data::Temperature::Cold);
    triples.push_back({0, cold[0], cold[1]});
    auto l = gate_loss_and_grad(ex, g, triples);
    auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
    auto cspan = [](const auto& m) { return std::span<const double>(m.data(), static_cast<std::size_t>(m.size())); };
    const std::vector<std::span<double>> params{span_of(g.bint.weight), span_of(g.iint.weight), span_of(g.out.weight),
                                                span_of(g.bint.bias), span_of(g.iint.bias)};
    const std::vector<std::span<const double>> analytic{cspan(l.grads.bint), cspan(l.grads.iint), cspan(l.grads.out),
                                                        cspan(l.grads.bint_bias), cspan(l.grads.iint_bias)};
    const auto rep = nn::finite_diff_check([&] { return gate_loss_and_grad(ex, g, triples).loss; }, params, analytic,
                                           1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

Stage3Config quick(int epochs) {
    Stage3Config cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 128;
    cfg.seed = 4;
    return cfg;
}

TEST(Stage3, ExpertOutputsAreNotTouched) {
    const auto s = small_split();
    const auto ex = random_experts(s, 3, 10);
    const ExpertOutputs before = ex;
    train_stage3(s, ex, quick(3));
    EXPECT_EQ(ex.bundle_embed, before.bundle_embed);
    EXPECT_EQ(ex.bundle_diff, before.bundle_diff);
    EXPECT_EQ(ex.item_embed, before.item_embed);
    EXPECT_EQ(ex.item_diff, before.item_diff);
    EXPECT_EQ(ex.user_bint, before.user_bint);
    EXPECT_EQ(ex.user_iint, before.user_iint);
}

TEST(Stage3, SameSeedIsBitIdentical) {
    const auto s = small_split();
    const auto ex = random_experts(s, 3, 11);
    const auto a = train_stage3(s, ex, quick(4));
    const auto b = train_stage3(s, ex, quick(4));
    EXPECT_EQ(a.gates.out.weight, b.gates.out.weight);
    EXPECT_EQ(a.gates.bint.bias, b.gates.bint.bias);
    EXPECT_EQ(a.gates.iint.weight, b.gates.iint.weight);
    EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(Stage3, WithoutValidationTheLastEpochWins) {
    auto s = small_split();
    s.val_x = data::InteractionSet(data::InteractionKind::UserBundle, s.catalog, {});
    const auto ex = random_experts(s, 3, 12);
    const auto r = train_stage3(s, ex, quick(5));
    EXPECT_EQ(r.best_epoch, 5);
    EXPECT_EQ(r.history.size(), 5u);
    EXPECT_LT(r.history.back().val_recall, 0.0);
}

}  // namespace
