#pragma once

#include <vector>

#include "modiffe/data/interactions.hpp"
#include "modiffe/nn/matrix.hpp"
#include "modiffe/nn/rng.hpp"

namespace modiffe::prior {

using data::Id;
using nn::Matrix;

// (user, positive bundle, negative bundle)
struct Triple {
    Id user = 0;
    Id pos = 0;
    Id neg = 0;
    bool operator==(const Triple&) const = default;
};

struct BprResult {
    double loss = 0.0;
    Matrix d_user;
    Matrix d_bundle;
};

// loss = sum over triples of -ln sigmoid(<u, pos> - <u, neg>), with
// gradients for both representation tables.
inline BprResult bpr_loss_and_grad(const Matrix& user_rep, const Matrix& bundle_rep, const std::vector<Triple>& triples) {
    if (user_rep.cols() != bundle_rep.cols()) throw ShapeError("bpr: dimension mismatch");
    BprResult r{0.0, Matrix::Zero(user_rep.rows(), user_rep.cols()), Matrix::Zero(bundle_rep.rows(), bundle_rep.cols())};
    for (const auto& t : triples) {
        const auto u = user_rep.row(t.user);
        const auto p = bundle_rep.row(t.pos);
        const auto n = bundle_rep.row(t.neg);
        const double margin = u.dot(p) - u.dot(n);
        r.loss += nn::softplus_neg(margin);
        const double coef = -nn::sigmoid(-margin);  // d loss / d margin
        r.d_user.row(t.user) += coef * (p - n);
        r.d_bundle.row(t.pos) += coef * u;
        r.d_bundle.row(t.neg) -= coef * u;
    }
    return r;
}

// One negative per train pair, uniform over `candidates` the user has not
// interacted with in `train`. Users who interacted with every candidate get
// no triple.
inline std::vector<Triple> sample_triples(const data::InteractionSet& train, const std::vector<Id>& candidates,
                                          nn::Rng& rng) {
    std::vector<Triple> out;
    out.reserve(train.size());
    for (const auto& [u, b] : train.pairs()) {
        std::size_t own = 0;
        for (Id c : train.rows()[u]) own += std::binary_search(candidates.begin(), candidates.end(), c) ? 1 : 0;
        if (own >= candidates.size()) continue;
        Id neg = 0;
        do {
            neg = candidates[static_cast<std::size_t>(rng.index(candidates.size()))];
        } while (train.contains(u, neg));
        out.push_back({u, b, neg});
    }
    return out;
}

}  // namespace modiffe::prior
