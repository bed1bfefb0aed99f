#include <gtest/gtest.h>

#include <cmath>

#include "modiffe/nn/adam.hpp"
#include "modiffe/nn/checkpoint.hpp"
#include "modiffe/nn/gradcheck.hpp"
#include "modiffe/nn/mlp.hpp"

namespace {

using namespace modiffe;
using namespace modiffe::nn;

MlpParams single_layer(Matrix w, Vector b) {
    MlpParams p;
    p.layers.push_back({std::move(w), std::move(b), Activation::Identity});
    return p;
}

// 3 -> 2 (SiLU) -> 2 with literal weights.
MlpParams literal_net() {
    MlpParams p;
    Matrix w1(2, 3), w2(2, 2);
    w1 << 0.5, -0.25, 0.1, -0.3, 0.8, 0.2;
    w2 << 1.0, -0.5, 0.25, 0.75;
    Vector b1(2), b2(2);
    b1 << 0.05, -0.1;
    b2 << 0.2, -0.3;
    p.layers.push_back({w1, b1, Activation::SiLU});
    p.layers.push_back({w2, b2, Activation::Identity});
    return p;
}

TEST(MlpForward, IdentityLayerPassesInputThrough) {
    const auto p = single_layer(Matrix::Identity(4, 4), Vector::Zero(4));
    Vector v(4);
    v << 1.5, -2.0, 0.0, 3.25;
    EXPECT_EQ(mlp_forward(p, v).output.row(0).transpose(), v);
}

TEST(MlpForward, ZeroWeightsReturnBias) {
    Vector b(3);
    b << 0.1, -0.2, 7.0;
    const auto p = single_layer(Matrix::Zero(3, 5), b);
    EXPECT_EQ(mlp_forward(p, Vector(Vector::Constant(5, 9.0))).output.row(0).transpose(), b);
}

TEST(MlpForward, TwoLayerSiluMatchesFrozenHandEvaluation) {
    // Evaluated scalar by scalar outside the library.
    const double expected[2] = {0.24577817217724218, 0.050414103812853106};
    const auto out = mlp_forward(literal_net(), Vector(Vector::Ones(3))).output;
    EXPECT_NEAR(out(0, 0), expected[0], 1e-12);
    EXPECT_NEAR(out(0, 1), expected[1], 1e-12);
}

TEST(MlpForward, SeededNetMatchesScalarLoop) {
    Rng rng(17);
    const std::array<Eigen::Index, 3> dims{3, 5, 2};
    const auto p = make_mlp(dims, Activation::SiLU, rng);
    const auto out = mlp_forward(p, Vector(Vector::Ones(3))).output;
    for (int o = 0; o < 2; ++o) {
        double y = p.layers[1].bias[o];
        for (int h = 0; h < 5; ++h) {
            double z = p.layers[0].bias[h];
            for (int i = 0; i < 3; ++i) z += p.layers[0].weight(h, i);
            y += p.layers[1].weight(o, h) * z / (1.0 + std::exp(-z));
        }
        EXPECT_NEAR(out(0, o), y, 1e-12);
    }
    const double bound = 1.0 / std::sqrt(3.0);
    EXPECT_LE(p.layers[0].weight.cwiseAbs().maxCoeff(), bound);
}

TEST(MlpForward, RejectsBadShapesAndNonFiniteInput) {
    const auto p = literal_net();
    EXPECT_THROW(mlp_forward(p, Vector(Vector::Ones(4))), ShapeError);
    Vector bad = Vector::Ones(3);
    bad[1] = std::nan("");
    EXPECT_THROW(mlp_forward(p, bad), ContractError);
    auto q = p;
    q.layers.back().activation = Activation::SiLU;
    EXPECT_THROW(mlp_forward(q, Vector(Vector::Ones(3))), ShapeError);
}

TEST(MlpBackward, LinearLayerCalculus) {
    Matrix w(2, 3);
    w << 1, 2, 3, -1, 0.5, 4;
    const auto p = single_layer(w, Vector::Zero(2));
    Vector x(3), g(2);
    x << 0.5, -1, 2;
    g << 3, -2;
    const auto tape = mlp_forward(p, x);
    const auto grads = mlp_backward(p, tape, Matrix(g.transpose()));
    EXPECT_TRUE(grads.weight[0].isApprox(g * x.transpose(), 1e-15));
    EXPECT_TRUE(grads.input.row(0).transpose().isApprox(w.transpose() * g, 1e-15));
    EXPECT_EQ(grads.bias[0], g);
}

TEST(MlpBackward, ZeroCotangentGivesZeroGradients) {
    const auto p = literal_net();
    const auto tape = mlp_forward(p, Vector(Vector::Ones(3)));
    auto grads = mlp_backward(p, tape, Matrix::Zero(1, 2));
    for (auto b : grads.blocks())
        for (double v : b) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(grads.input.isZero(0.0));
}

TEST(MlpBackward, StaleTapeIsRejected) {
    auto p = literal_net();
    const auto tape = mlp_forward(p, Vector(Vector::Ones(3)));
    ++p.generation;
    EXPECT_THROW(mlp_backward(p, tape, Matrix::Ones(1, 2)), ContractError);
    const auto other = literal_net();
    const auto tape2 = mlp_forward(other, Vector(Vector::Ones(3)));
    EXPECT_THROW(mlp_backward(p, tape2, Matrix::Ones(1, 2)), ContractError);
}

TEST(MlpBackward, RandomNetMatchesFiniteDifferences) {
    Rng rng(5);
    const std::array<Eigen::Index, 3> dims{4, 6, 3};
    auto p = make_mlp(dims, Activation::SiLU, rng);
    const Matrix x = normal_matrix(5, 4, 1.0, rng);
    const Matrix cot = normal_matrix(5, 3, 1.0, rng);
    auto loss = [&] { return mlp_forward(p, x).output.cwiseProduct(cot).sum(); };
    auto grads = mlp_backward(p, mlp_forward(p, x), cot);
    std::vector<std::span<const double>> analytic;
    for (auto b : grads.blocks()) analytic.emplace_back(b);
    const auto params = p.blocks();
    const auto rep = finite_diff_check(loss, params, analytic, 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

TEST(MlpBackward, DirectionalDerivativeConsistency) {
    Rng rng(8);
    const std::array<Eigen::Index, 4> dims{3, 4, 4, 2};
    auto p = make_mlp(dims, Activation::Tanh, rng);
    const Matrix x = normal_matrix(2, 3, 1.0, rng);
    const Matrix cot = normal_matrix(2, 2, 1.0, rng);
    auto grads = mlp_backward(p, mlp_forward(p, x), cot);
    auto blocks = p.blocks();
    auto gblocks = grads.blocks();
    std::vector<std::vector<double>> dir;
    double norm2 = 0.0;
    for (auto b : blocks) {
        dir.emplace_back(b.size());
        for (auto& d : dir.back()) {
            d = rng.normal();
            norm2 += d * d;
        }
    }
    double analytic = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (std::size_t i = 0; i < blocks[b].size(); ++i) {
            dir[b][i] /= std::sqrt(norm2);
            analytic += dir[b][i] * gblocks[b][i];
        }
    auto shifted = [&](double h) {
        for (std::size_t b = 0; b < blocks.size(); ++b)
            for (std::size_t i = 0; i < blocks[b].size(); ++i) blocks[b][i] += h * dir[b][i];
        const double l = mlp_forward(p, x).output.cwiseProduct(cot).sum();
        for (std::size_t b = 0; b < blocks.size(); ++b)
            for (std::size_t i = 0; i < blocks[b].size(); ++i) blocks[b][i] -= h * dir[b][i];
        return l;
    };
    const double h = 1e-5;
    const double numeric = (shifted(h) - shifted(-h)) / (2 * h);
    EXPECT_LT(relative_error(analytic, numeric), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    std::vector<double> p{1.0, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    AdamState st(AdamConfig{0.1});
    const std::vector<ParamBlock> blocks{{p, 0}};
    const std::vector<std::span<const double>> grads{g};
    for (int i = 0; i < 5; ++i) adam_step(st, blocks, grads);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_EQ(st.step, 5u);
}

TEST(Adam, FirstStepClosedForm) {
    std::vector<double> p{0.5, -0.25, 2.0};
    const std::vector<double> g{0.2, -3.0, 1e-3};
    const double lr = 0.1, eps = 1e-8;
    AdamState st(AdamConfig{lr, 0.9, 0.999, eps, 0.0});
    const std::vector<ParamBlock> blocks{{p, 0}};
    const std::vector<std::span<const double>> grads{g};
    const std::vector<double> before = p;
    adam_step(st, blocks, grads);
    for (std::size_t i = 0; i < p.size(); ++i) {
        // m_hat = g, v_hat = g^2 after one bias-corrected step
        const double m_hat = (0.1 * g[i]) / (1 - 0.9);
        const double v_hat = (0.001 * g[i] * g[i]) / (1 - 0.999);
        EXPECT_NEAR(p[i], before[i] - lr * m_hat / (std::sqrt(v_hat) + eps), 1e-15);
        EXPECT_LT((p[i] - before[i]) * g[i], 0.0);
    }
}

TEST(Adam, ClonedStatesEvolveIdentically) {
    Rng rng(1);
    std::vector<double> a(6), b;
    for (auto& v : a) v = rng.normal();
    b = a;
    AdamState sa(AdamConfig{0.01, 0.9, 0.999, 1e-8, 0.01});
    for (int step = 0; step < 3; ++step) {
        std::vector<double> g(6);
        for (auto& v : g) v = rng.normal();
        AdamState sb = sa;
        std::vector<double> b2 = b;
        const std::vector<std::span<const double>> grads{g};
        adam_step(sa, std::vector<ParamBlock>{{a, 0}}, grads);
        adam_step(sb, std::vector<ParamBlock>{{b2, 0}}, grads);
        EXPECT_EQ(a, b2);
        b = a;
    }
}

TEST(Adam, RowRestrictedWeightDecay) {
    // Two rows of width 2; only row 0 has a gradient.
    std::vector<double> p{1.0, 1.0, 1.0, 1.0};
    const std::vector<double> g{0.5, 0.0, 0.0, 0.0};
    AdamState st(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
    adam_step(st, std::vector<ParamBlock>{{p, 2}}, std::vector<std::span<const double>>{g});
    EXPECT_NEAR(p[1], 1.0 - 0.1 * 0.5, 1e-15);  // decay only, zero gradient entry in an active row
    EXPECT_EQ(p[2], 1.0);
    EXPECT_EQ(p[3], 1.0);
}

TEST(Adam, NonFiniteGradientAborts) {
    std::vector<double> p{1.0};
    const std::vector<double> g{std::numeric_limits<double>::infinity()};
    AdamState st;
    EXPECT_THROW(adam_step(st, std::vector<ParamBlock>{{p, 0}}, std::vector<std::span<const double>>{g}),
                 DivergenceError);
    EXPECT_EQ(st.step, 0u);
}

TEST(GradCheck, QuadraticIsExact) {
    std::vector<double> theta{0.3, -1.2, 4.0, 0.0};
    auto loss = [&] {
        double s = 0;
        for (double t : theta) s += t * t / 2;
        return s;
    };
    const std::vector<double> analytic = theta;
    const std::vector<std::span<double>> params{theta};
    const std::vector<std::span<const double>> grads{analytic};
    const auto rep = finite_diff_check(loss, params, grads, 1e-4, 1e-9);
    EXPECT_TRUE(rep.passed);
    EXPECT_LT(rep.max_rel_error, 1e-9);
    EXPECT_EQ(theta, analytic);  // restored after perturbation
}

TEST(GradCheck, ConstantLossHasZeroGradient) {
    std::vector<double> theta{1.0, 2.0};
    const std::vector<double> zero(2, 0.0);
    const std::vector<std::span<double>> params{theta};
    const std::vector<std::span<const double>> grads{zero};
    const auto rep = finite_diff_check([] { return 3.5; }, params, grads, 1e-5, 1e-12);
    EXPECT_TRUE(rep.passed);
    EXPECT_EQ(rep.max_rel_error, 0.0);
}

TEST(GradCheck, DetectsWrongGradientAndBadStep) {
    std::vector<double> theta{1.0};
    const std::vector<double> wrong{3.0};
    const std::vector<std::span<double>> params{theta};
    const std::vector<std::span<const double>> grads{wrong};
    auto loss = [&] { return theta[0] * theta[0]; };
    EXPECT_FALSE(finite_diff_check(loss, params, grads, 1e-5, 1e-4).passed);
    EXPECT_THROW(finite_diff_check(loss, params, grads, 1e-2, 1e-4), ParameterError);
}

TEST(Rng, FrozenFirstDraws) {
    // From an independent implementation of the documented algorithm.
    Rng rng(42);
    EXPECT_EQ(rng.next_u64(), 0x989b3f130a063869ull);
    EXPECT_EQ(rng.next_u64(), 0x290db4bf2570ded7ull);
    EXPECT_EQ(rng.next_u64(), 0x2a990be63a01b2d5ull);
    EXPECT_EQ(Rng(42).uniform(), 0.5961188718302076);
}

TEST(Rng, EqualSeedsGiveEqualStreams) {
    Rng a(123), b(123), c(124);
    bool differs = false;
    for (int i = 0; i < 1'000'000; ++i) {
        const auto x = a.next_u64();
        ASSERT_EQ(x, b.next_u64());
        differs = differs || x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
    Rng a(9);
    const Rng child = a.split(1);
    Rng fresh(9);
    EXPECT_EQ(a.next_u64(), fresh.next_u64());
    Rng c1 = child, c2 = Rng(9).split(1), c3 = Rng(9).split(2);
    const auto v = c1.next_u64();
    EXPECT_EQ(v, c2.next_u64());
    EXPECT_NE(v, c3.next_u64());
}

TEST(Rng, DistributionMoments) {
    Rng rng(77);
    const int n = 200'000;
    double su = 0, sn = 0, sn2 = 0, sb = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
        sb += rng.beta(0.9, 0.9);
        ASSERT_LT(rng.index(7), 7u);
    }
    EXPECT_NEAR(su / n, 0.5, 0.01);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
    EXPECT_NEAR(sb / n, 0.5, 0.01);
    EXPECT_THROW(rng.index(0), ParameterError);
}

TEST(Checkpoint, SerializeRoundTripIsByteIdentical) {
    Checkpoint ck;
    ck.stage = "stage1";
    ck.config = {{"dim", 4}, {"name", "x"}};
    ck.meta = {{"best_epoch", 3}};
    Rng rng(2);
    ck.put("E_u", normal_matrix(3, 4, 1.0, rng));
    ck.put("E_b", normal_matrix(5, 4, 1.0, rng));
    const std::string bytes = serialize(ck);
    EXPECT_EQ(bytes.substr(0, 8), "MDFCKPT1");
    const Checkpoint back = deserialize(bytes);
    EXPECT_EQ(serialize(back), bytes);
    EXPECT_EQ(back.get("E_b"), ck.get("E_b"));
    EXPECT_EQ(content_hash(back), content_hash(ck));
    EXPECT_THROW(back.get("missing"), ContractError);
}

TEST(Checkpoint, CorruptionIsDetected) {
    Checkpoint ck;
    ck.stage = "stage2";
    ck.put("w", Matrix::Ones(2, 2));
    std::string bytes = serialize(ck);
    std::string flipped = bytes;
    flipped.back() ^= 0x01;
    EXPECT_THROW(deserialize(flipped), IoError);
    EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 8)), IoError);
    EXPECT_THROW(deserialize("NOTACKPT12345678"), IoError);
    EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

}  // namespace
