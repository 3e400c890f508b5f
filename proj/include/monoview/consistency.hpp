#pragma once

#include <optional>
#include <utility>

#include "monoview/warp.hpp"

namespace monoview {

/// Decay rate of the confidence measure.
struct ConsistencyParams {
    float gamma = 0.07f;
};

/// Per-branch record of everything one synthesis pass produces.
struct PredictionBundle {
    Tensorf input;        // branch input image
    Tensorf dbp;          // disparity-based prediction
    Tensorf ref;          // refined prediction
    Tensorf blended;      // final prediction (confidence blend)
    Tensorf disparity;    // (N,H,W,1), >= 0
    Tensorf v;            // learned confidence estimate, (0,1)
    std::optional<Tensorf> c; // training-time consistency confidence
};

namespace ops {

/// Forward-backward consistency confidences:
///   C_LR(x,y) = exp(-gamma |d_LR(x,y) - d_RL(x + d_LR(x,y), y)|)
///   C_RL(x,y) = exp(-gamma |d_RL(x,y) - d_LR(x - d_RL(x,y), y)|)
/// Cross-map lookups use the same bilinear border-clamped sampler as warp().
template <typename T>
std::pair<Value, Value> confidence_maps(Tape<T>& t, Value d_lr, Value d_rl, T gamma) {
    require(gamma > T(0), "confidence_maps: gamma must be positive");
    const Tensor<T>& a = t.value(d_lr);
    const Tensor<T>& b = t.value(d_rl);
    require(a.shape() == b.shape(), "confidence_maps: disparity shapes disagree: " +
                                        a.shape().str() + " vs " + b.shape().str());
    Value rl_at_lr = warp(t, d_rl, d_lr, WarpDirection::left_to_right);
    Value c_lr = vexp(t, scale(t, vabs(t, sub(t, d_lr, rl_at_lr)), -gamma));
    Value lr_at_rl = warp(t, d_lr, d_rl, WarpDirection::right_to_left);
    Value c_rl = vexp(t, scale(t, vabs(t, sub(t, d_rl, lr_at_rl)), -gamma));
    return {c_lr, c_rl};
}

/// Confidence blend of the two predictions; v weights the REF image:
/// out = v*ref + (1-v)*dbp, v broadcast across channels.
template <typename T>
Value blend(Tape<T>& t, Value dbp, Value ref, Value v) {
    const Tensor<T>& vv = t.value(v);
    for (std::int64_t i = 0; i < vv.size(); ++i)
        require(vv[i] >= T(0) && vv[i] <= T(1), "blend: v outside [0,1]");
    return add(t, mul_c1(t, ref, v), mul_c1(t, dbp, affine(t, v, T(-1), T(1))));
}

} // namespace ops

/// Plain confidence maps (Eq. above) -> (C_LR, C_RL).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> confidence_maps(const Tensor<T>& d_lr,
                                                const Tensor<T>& d_rl, T gamma) {
    Tape<T> t;
    auto [c_lr, c_rl] =
        ops::confidence_maps(t, t.constant(d_lr), t.constant(d_rl), gamma);
    return {t.value(c_lr), t.value(c_rl)};
}

/// Plain blend.
template <typename T>
Tensor<T> blend(const Tensor<T>& dbp, const Tensor<T>& ref, const Tensor<T>& v) {
    Tape<T> t;
    return t.value(ops::blend(t, t.constant(dbp), t.constant(ref), t.constant(v)));
}

/// 1 where confidence is below threshold (likely occluded), else 0.
template <typename T>
Tensor<T> occlusion_mask(const Tensor<T>& c, T threshold) {
    require(threshold > T(0) && threshold < T(1), "occlusion_mask: threshold must be in (0,1)");
    Tensor<T> mask(c.shape());
    for (std::int64_t i = 0; i < c.size(); ++i)
        mask[i] = c[i] < threshold ? T(1) : T(0);
    return mask;
}

} // namespace monoview
