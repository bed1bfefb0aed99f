#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "modiffe/error.hpp"
#include "modiffe/nn/matrix.hpp"
#include "modiffe/nn/rng.hpp"

namespace modiffe::eval {

using nn::Matrix;
using nn::Vector;

struct Projection {
    Matrix coords;                     // n x 2
    std::array<Vector, 2> components;  // unit principal axes
    std::array<double, 2> variance{};  // eigenvalues of the covariance
    double total_variance = 0.0;
    std::vector<std::string> warnings;

    double explained(int k) const {
        return total_variance > 0.0 ? variance[static_cast<std::size_t>(k)] / total_variance : 0.0;
    }
};

namespace detail {

// Dominant eigenpair of a symmetric PSD matrix by power iteration.
inline std::pair<double, Vector> power_iteration(const Matrix& c, nn::Rng& rng, int max_iter = 5000,
                                                 double tol = 1e-13) {
    Vector v(c.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = c * v;
        const double norm = w.norm();
        if (norm == 0.0) return {0.0, v};
        w /= norm;
        const double change = std::min((w - v).norm(), (w + v).norm());
        v = std::move(w);
        lambda = v.dot(c * v);
        if (change < tol) break;
    }
    return {lambda, v};
}

}  // namespace detail

// Top-two PCA of the rows of `reps`. The sign of each axis is fixed so that
// its largest-magnitude entry is positive.
inline Projection project_2d(const Matrix& reps, std::uint64_t seed = 0) {
    if (reps.rows() < 3) throw ContractError("project_2d: need at least 3 rows");
    nn::require_finite(reps, "project_2d input");
    const Vector mean = reps.colwise().mean().transpose();
    const Matrix centered = reps.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(reps.rows() - 1);

    Projection p;
    p.total_variance = cov.trace();
    nn::Rng rng = nn::Rng(seed).split(0x9CA);
    Matrix deflated = cov;
    const double floor = 1e-12 * std::max(p.total_variance, 1e-300);
    for (int k = 0; k < 2; ++k) {
        auto [lambda, v] = detail::power_iteration(deflated, rng);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        if (lambda <= floor) {
            p.warnings.push_back("project_2d: input has rank " + std::to_string(k) +
                                 "; component " + std::to_string(k + 1) + " set to zero");
            lambda = 0.0;
            v.setZero();
        }
        p.variance[static_cast<std::size_t>(k)] = lambda;
        p.components[static_cast<std::size_t>(k)] = v;
        deflated -= lambda * v * v.transpose();
    }
    p.coords.resize(reps.rows(), 2);
    p.coords.col(0) = centered * p.components[0];
    p.coords.col(1) = centered * p.components[1];
    return p;
}

// CSV with header `id,x,y,label`, one row per input row.
inline void write_projection_csv(const Projection& p, const std::vector<std::string>& labels, const std::string& path) {
    if (labels.size() != static_cast<std::size_t>(p.coords.rows()))
        throw ShapeError("write_projection_csv: one label per row required");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "id,x,y,label\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < p.coords.rows(); ++i)
        out << i << ',' << p.coords(i, 0) << ',' << p.coords(i, 1) << ',' << labels[static_cast<std::size_t>(i)] << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace modiffe::eval
