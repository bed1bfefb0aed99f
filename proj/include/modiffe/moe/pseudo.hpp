#pragma once

#include "modiffe/moe/gates.hpp"

namespace modiffe::moe {

// Interpolated bundle with zeroed cold-aware features. The item layer is
// kept as mean-pooled embedded/diffusion reps so it can be fused like a
// one-item bundle (all item features are zero, so fusing before or after
// pooling gives the same result).
struct PseudoBundle {
    Id source_x = 0, source_y = 0;
    double lambda = 0.0;
    BundleParts parts;
};

inline PseudoBundle interpolate_pseudo(Id bx, Id by, double lambda, const ExpertOutputs& ex) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("interpolate_pseudo: lambda must lie in [0, 1]");
    if (bx == by) throw ParameterError("interpolate_pseudo: source bundles must differ");
    const BundleParts px = bundle_parts(ex, bx), py = bundle_parts(ex, by);
    auto mix = [lambda](const auto& a, const auto& b) -> Vector { return lambda * a + (1.0 - lambda) * b; };
    PseudoBundle out;
    out.source_x = bx;
    out.source_y = by;
    out.lambda = lambda;
    out.parts.bint_embed = mix(px.bint_embed, py.bint_embed);
    out.parts.bint_diff = mix(px.bint_diff, py.bint_diff);
    out.parts.bint_feature = 0.0;
    const Vector ie = mix(px.item_embed.colwise().mean().transpose(), py.item_embed.colwise().mean().transpose());
    const Vector id = mix(px.item_diff.colwise().mean().transpose(), py.item_diff.colwise().mean().transpose());
    out.parts.item_embed = ie.transpose();
    out.parts.item_diff = id.transpose();
    out.parts.item_feature = {0.0};
    return out;
}

}  // namespace modiffe::moe
