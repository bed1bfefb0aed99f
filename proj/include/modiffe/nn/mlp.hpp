#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modiffe/nn/matrix.hpp"

namespace modiffe::nn {

enum class Activation { SiLU, Tanh, Identity };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::SiLU: return "silu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "?";
}

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::Identity;
};

struct MlpParams {
    std::vector<DenseLayer> layers;
    // Bumped whenever parameters change through the library; a tape
    // records it so stale tapes are detected in backward.
    std::uint64_t generation = 0;

    Eigen::Index in_dim() const { return layers.front().weight.cols(); }
    Eigen::Index out_dim() const { return layers.back().weight.rows(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    // Weight then bias for each layer, in order.
    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        for (auto& l : layers) {
            out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
        return out;
    }
};

// Dimensions {in, h1, ..., out}; every layer but the last uses `hidden`.
// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline MlpParams make_mlp(std::span<const Eigen::Index> dims, Activation hidden, Rng& rng) {
    if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output dims");
    MlpParams p;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        DenseLayer layer;
        layer.weight = uniform_matrix(dims[i + 1], dims[i], bound, rng);
        layer.bias = uniform_matrix(dims[i + 1], 1, bound, rng);
        layer.activation = (i + 2 == dims.size()) ? Activation::Identity : hidden;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

inline void validate(const MlpParams& p) {
    if (p.layers.empty()) throw ShapeError("mlp: no layers");
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        if (l.bias.size() != l.weight.rows()) throw ShapeError("mlp: bias/weight mismatch at layer " + std::to_string(i));
        if (i > 0 && l.weight.cols() != p.layers[i - 1].weight.rows())
            throw ShapeError("mlp: layer " + std::to_string(i) + " does not chain");
    }
    if (p.layers.back().activation != Activation::Identity) throw ShapeError("mlp: final activation must be identity");
}

struct MlpTape {
    const MlpParams* params = nullptr;
    std::uint64_t generation = 0;
    std::vector<Matrix> inputs;  // batch x in, per layer
    std::vector<Matrix> pre;     // batch x out, per layer (before activation)
    Matrix output;               // batch x out_dim
};

struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;
    Matrix input;

    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        for (std::size_t i = 0; i < weight.size(); ++i) {
            out.emplace_back(weight[i].data(), static_cast<std::size_t>(weight[i].size()));
            out.emplace_back(bias[i].data(), static_cast<std::size_t>(bias[i].size()));
        }
        return out;
    }
};

namespace detail {

inline Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::SiLU: return z.unaryExpr([](double x) { return x * sigmoid(x); });
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Identity: return z;
    }
    return z;
}

inline Matrix activation_grad(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::SiLU:
            return z.unaryExpr([](double x) {
                const double s = sigmoid(x);
                return s * (1.0 + x * (1.0 - s));
            });
        case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
        case Activation::Identity: return Matrix::Ones(z.rows(), z.cols());
    }
    return z;
}

}  // namespace detail

// Row-batched forward: input is batch x in_dim.
inline MlpTape mlp_forward(const MlpParams& p, const Matrix& input) {
    validate(p);
    if (input.cols() != p.in_dim())
        throw ShapeError("mlp_forward: input has " + std::to_string(input.cols()) + " columns, expected " +
                         std::to_string(p.in_dim()));
    require_finite(input, "mlp_forward input");
    MlpTape tape;
    tape.params = &p;
    tape.generation = p.generation;
    Matrix h = input;
    for (const auto& l : p.layers) {
        Matrix z = h * l.weight.transpose();
        z.rowwise() += l.bias.transpose();
        tape.inputs.push_back(std::move(h));
        h = detail::activate(z, l.activation);
        tape.pre.push_back(std::move(z));
    }
    tape.output = std::move(h);
    return tape;
}

inline MlpTape mlp_forward(const MlpParams& p, const Vector& input) {
    return mlp_forward(p, Matrix(input.transpose()));
}

// Gradients of sum(grad_output .* output) with respect to every parameter
// and the input, summed over the batch.
inline MlpGrads mlp_backward(const MlpParams& p, const MlpTape& tape, const Matrix& grad_output) {
    if (tape.params != &p || tape.generation != p.generation)
        throw ContractError("mlp_backward: tape does not belong to the current parameters");
    if (grad_output.rows() != tape.output.rows() || grad_output.cols() != tape.output.cols())
        throw ShapeError("mlp_backward: grad_output shape mismatch");
    const std::size_t n = p.layers.size();
    MlpGrads g;
    g.weight.resize(n);
    g.bias.resize(n);
    Matrix upstream = grad_output;
    for (std::size_t k = n; k-- > 0;) {
        const auto& l = p.layers[k];
        Matrix dz = upstream.cwiseProduct(detail::activation_grad(tape.pre[k], l.activation));
        g.weight[k] = dz.transpose() * tape.inputs[k];
        g.bias[k] = dz.colwise().sum().transpose();
        upstream = dz * l.weight;
    }
    g.input = std::move(upstream);
    return g;
}

}  // namespace modiffe::nn
