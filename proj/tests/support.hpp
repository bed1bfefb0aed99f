#pragma once

// Helpers shared by the unit suites and the acceptance binary: scratch
// directories, small random relations, and the independent oracles that
// library results are compared against.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "modiffe/data/split.hpp"
#include "modiffe/diffusion/sampler.hpp"
#include "modiffe/nn/matrix.hpp"
#include "modiffe/nn/rng.hpp"

namespace modiffe::testing {

using data::Id;
using data::InteractionKind;
using data::InteractionSet;
using data::Pair;
using nn::Matrix;
using nn::Vector;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("modiffe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Each possible pair is present with probability `density`.
inline std::vector<Pair> random_pairs(std::size_t rows, std::size_t cols, double density, nn::Rng& rng) {
    std::vector<Pair> out;
    for (Id r = 0; r < rows; ++r)
        for (Id c = 0; c < cols; ++c)
            if (rng.uniform() < density) out.emplace_back(r, c);
    return out;
}

// ---- propagation oracle -----------------------------------------------------

// Dense D^{-1/2} A D^{-1/2} with A the bipartite adjacency (left x right).
inline Matrix dense_normalized(const InteractionSet& edges) {
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(edges.n_rows()), static_cast<Eigen::Index>(edges.n_cols()));
    for (const auto& [l, r] : edges.pairs()) a(l, r) = 1.0;
    const Vector dl = a.rowwise().sum();
    const Vector dr = a.colwise().sum().transpose();
    for (Eigen::Index l = 0; l < a.rows(); ++l)
        for (Eigen::Index r = 0; r < a.cols(); ++r)
            if (a(l, r) != 0.0) a(l, r) = 1.0 / (std::sqrt(dl[l]) * std::sqrt(dr[r]));
    return a;
}

// Powers of the full (left+right) symmetric block matrix, pooled with 1/K.
inline std::pair<Matrix, Matrix> dense_propagate(const InteractionSet& edges, const Matrix& e_left,
                                                 const Matrix& e_right, int layers) {
    const Matrix a = dense_normalized(edges);
    const Eigen::Index nl = a.rows(), nr = a.cols(), n = nl + nr;
    Matrix big = Matrix::Zero(n, n);
    big.topRightCorner(nl, nr) = a;
    big.bottomLeftCorner(nr, nl) = a.transpose();
    Matrix e0(n, e_left.cols());
    e0.topRows(nl) = e_left;
    e0.bottomRows(nr) = e_right;
    Matrix layer = e0, pooled = e0;
    for (int k = 1; k <= layers; ++k) {
        layer = big * layer;
        pooled += layer;
    }
    pooled /= static_cast<double>(layers);
    return {pooled.topRows(nl), pooled.bottomRows(nr)};
}

// ---- ranking oracle ---------------------------------------------------------

struct BruteMetrics {
    double recall = 0.0;
    double ndcg = 0.0;
};

// Full sort of every candidate, then the metric definitions applied to
// explicit 1-based rank positions.
inline BruteMetrics brute_force_metrics(const std::vector<double>& scores, const std::vector<bool>& masked,
                                        const std::vector<Id>& positives, std::size_t k) {
    std::vector<Id> all;
    for (Id b = 0; b < scores.size(); ++b)
        if (!masked[b]) all.push_back(b);
    std::stable_sort(all.begin(), all.end(), [&](Id a, Id b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> rank_of(scores.size(), 0);
    for (std::size_t r = 0; r < all.size(); ++r) rank_of[all[r]] = r + 1;
    double hits = 0.0, dcg = 0.0;
    for (Id p : positives) {
        const std::size_t r = rank_of[p];
        if (r != 0 && r <= k) {
            hits += 1.0;
            dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
        }
    }
    double idcg = 0.0;
    for (std::size_t r = 1; r <= std::min(k, positives.size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    return {hits / static_cast<double>(positives.size()), dcg / idcg};
}

// ---- split invariants -------------------------------------------------------

// Empty string when every dataset invariant holds, else the first violation.
inline std::string split_violation(const data::ScenarioSplit& s, const InteractionSet& x) {
    const auto& tr = s.train_x.pairs();
    const auto& va = s.val_x.pairs();
    const auto& te = s.test_x.pairs();
    if (tr.size() + va.size() + te.size() != x.size()) return "sizes do not add up to |X|";
    std::vector<Pair> merged;
    merged.insert(merged.end(), tr.begin(), tr.end());
    merged.insert(merged.end(), va.begin(), va.end());
    merged.insert(merged.end(), te.begin(), te.end());
    std::sort(merged.begin(), merged.end());
    if (std::adjacent_find(merged.begin(), merged.end()) != merged.end()) return "partitions overlap";
    if (merged != x.pairs()) return "union differs from X";
    for (Id b = 0; b < s.catalog.n_bundles; ++b) {
        bool has_train = false;
        for (const auto& [u, bb] : tr) has_train = has_train || bb == b;
        if (s.bint_cold(b) == has_train) return "bint label of bundle " + std::to_string(b);
    }
    for (Id i = 0; i < s.catalog.n_items; ++i) {
        const bool has_train = !s.y_train.cols()[i].empty();
        if (s.item_cold(i) == has_train) return "item label of item " + std::to_string(i);
    }
    for (Id b = 0; b < s.catalog.n_bundles; ++b) {
        const auto& items = s.z.rows()[b];
        std::size_t cold = 0;
        for (Id i : items) cold += s.item_cold(i) ? 1 : 0;
        const double ratio = items.empty() ? 0.0 : double(cold) / double(items.size());
        if (s.cold_item_ratio[b] != ratio) return "cold_item_ratio of bundle " + std::to_string(b);
        if (ratio < 0.0 || ratio > 1.0) return "cold_item_ratio out of range";
        if ((ratio == 0.0) != !s.iint_cold(b)) return "iint label of bundle " + std::to_string(b);
    }
    const auto st = data::cold_stats(s);
    std::size_t sum = 0, test_sum = 0;
    double ratio_sum = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            sum += st.count[i][j];
            test_sum += st.test_interactions[i][j];
            ratio_sum += st.ratio[i][j];
        }
    if (sum != s.catalog.n_bundles) return "four-way counts do not sum to n_bundles";
    if (test_sum != te.size()) return "test shares do not cover the test set";
    if (std::abs(ratio_sum - 1.0) > 1e-12) return "ratios do not sum to 1";
    return {};
}

// A random dataset where every bundle has users and items, so that every
// scenario can be split.
struct RandomDataset {
    InteractionSet x, y, z;
};

inline RandomDataset random_dataset(nn::Rng& rng) {
    const std::size_t users = 4 + rng.index(12);
    const std::size_t bundles = 10 + rng.index(20);
    const std::size_t items = 4 + rng.index(20);
    data::Catalog cat{users, bundles, items};
    std::vector<Pair> x = random_pairs(users, bundles, 0.1 + 0.3 * rng.uniform(), rng);
    std::vector<Pair> z = random_pairs(bundles, items, 0.1 + 0.3 * rng.uniform(), rng);
    for (Id b = 0; b < bundles; ++b) {
        x.emplace_back(static_cast<Id>(rng.index(users)), b);
        z.emplace_back(b, static_cast<Id>(rng.index(items)));
    }
    // Some items stay out of Y so that cold items occur.
    std::vector<Pair> y = random_pairs(users, items, 0.05 + 0.3 * rng.uniform(), rng);
    return {InteractionSet(InteractionKind::UserBundle, cat, std::move(x)),
            InteractionSet(InteractionKind::UserItem, cat, std::move(y)),
            InteractionSet(InteractionKind::BundleItem, cat, std::move(z))};
}

// ---- diffusion toys ---------------------------------------------------------

struct OnePointResult {
    double final_loss = 0.0;
    double worst_rel_error = 0.0;
};

// Trains on a single repeated vector and denoises from random anchors.
inline OnePointResult one_point_toy(std::uint64_t seed) {
    using namespace diffusion;
    const auto s = make_schedule(ScheduleKind::Linear, 100);
    Vector v(4);
    v << 1.0, -0.5, 0.25, 2.0;
    Matrix reps(32, 4);
    for (Eigen::Index i = 0; i < reps.rows(); ++i) reps.row(i) = v.transpose();
    const Matrix cond = Matrix::Zero(32, 2);
    DenoiserConfig cfg;
    cfg.time_dim = 8;
    cfg.epochs = 3000;
    cfg.batch_size = 32;
    cfg.seed = seed;
    const auto trained = train_diffusion(reps, cond, s, cfg);
    OnePointResult out{trained.epoch_loss.back(), 0.0};
    nn::Rng rng(seed + 100);
    for (int k = 0; k < 20; ++k) {
        Vector start(4);
        for (Eigen::Index j = 0; j < 4; ++j) start[j] = 2.0 * rng.normal();
        const Vector w = reverse_denoise(start, Vector::Zero(2), trained.denoiser, s, 20);
        out.worst_rel_error = std::max(out.worst_rel_error, (w - v).norm() / v.norm());
    }
    return out;
}

struct TwoBlobResult {
    double sigma = 0.3;
    std::size_t generated = 0;
    std::size_t within_3sigma = 0;
    Vector mean_left, mean_right;  // generated means per conditioning blob
};

// Blobs at (-2, 0) and (2, 0) with the blob sign as the condition; samples
// start from standard-normal anchors.
inline TwoBlobResult two_blob_toy(std::uint64_t seed) {
    using namespace diffusion;
    TwoBlobResult out;
    const auto s = make_schedule(ScheduleKind::Linear, 100);
    nn::Rng rng(seed);
    const int n = 200;
    Matrix x(n, 2), c(n, 1);
    for (int i = 0; i < n; ++i) {
        const double sign = i % 2 ? 1.0 : -1.0;
        x(i, 0) = 2.0 * sign + out.sigma * rng.normal();
        x(i, 1) = out.sigma * rng.normal();
        c(i, 0) = sign;
    }
    DenoiserConfig cfg;
    cfg.time_dim = 8;
    cfg.epochs = 400;
    cfg.batch_size = 64;
    cfg.lr = 2e-3;
    cfg.seed = seed;
    const auto trained = train_diffusion(x, c, s, cfg);
    out.mean_left = Vector::Zero(2);
    out.mean_right = Vector::Zero(2);
    for (int k = 0; k < 200; ++k) {
        const double sign = k % 2 ? 1.0 : -1.0;
        Vector start(2), cond(1), centre(2);
        start << rng.normal(), rng.normal();
        cond << sign;
        centre << 2.0 * sign, 0.0;
        const Vector w = reverse_denoise(start, cond, trained.denoiser, s, 20);
        ++out.generated;
        out.within_3sigma += (w - centre).norm() < 3.0 * out.sigma ? 1 : 0;
        (sign > 0 ? out.mean_right : out.mean_left) += w / 100.0;
    }
    return out;
}

}  // namespace modiffe::testing
