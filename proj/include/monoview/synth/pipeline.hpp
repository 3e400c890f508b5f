#pragma once

#include <vector>

#include "monoview/consistency.hpp"
#include "monoview/nn/model.hpp"

namespace monoview::synth {

/// Reflection-pad an image (bottom/right, edge included) to the next multiple
/// of `multiple` in both dimensions. No-op when already divisible.
Tensorf pad_to_multiple(const Tensorf& image, int multiple);

/// Top-left crop back to (h, w).
Tensorf crop_to(const Tensorf& t, int h, int w);

/// Run one branch end to end on a normalized [-1,1] input image (1,H,W,3).
/// Inputs whose dimensions are not divisible by 64 are reflection-padded and
/// every artifact is cropped back. direction == left_to_right treats the
/// input as a left view and synthesizes the right one.
PredictionBundle synthesize(const nn::ModelGraph& model, const Tensorf& input,
                            WarpDirection direction);

struct InterpolationFrame {
    float alpha = 0.0f;
    Tensorf warped;    // input warped by alpha * disparity
    Tensorf blended;   // final frame after refinement and confidence blend
    Tensorf v;         // confidence estimate for this frame
    Tensorf disparity; // alpha-scaled disparity
};

/// View interpolation: scale the predicted disparity by each alpha, warp the
/// input, then run the pre-trained refiner + CBM on the warped view and
/// blend. alphas must be ascending, within [0,1].
std::vector<InterpolationFrame> interpolate(const nn::ModelGraph& model,
                                            const Tensorf& input,
                                            WarpDirection direction,
                                            const std::vector<float>& alphas);

} // namespace monoview::synth
