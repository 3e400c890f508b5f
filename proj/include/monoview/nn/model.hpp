#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monoview/nn/component.hpp"
#include "monoview/warp.hpp"

namespace monoview::nn {

/// Full two-branch graph. The encoder is a single shared parameter store used
/// by both branches; the remaining components come in independent per-branch
/// pairs. Component suffixes name the view a branch synthesizes: decoder_lr
/// estimates d_LR (right view from a left input), refiner_r / cbm_r refine
/// and merge that right-view prediction; the *_l components mirror this for
/// left-view synthesis from a right input via d_RL.
struct ModelGraph {
    NetworkComponent encoder;
    NetworkComponent decoder_lr, decoder_rl;
    NetworkComponent refiner_l, refiner_r;
    NetworkComponent cbm_l, cbm_r;

    std::vector<NetworkComponent*> components();
    std::vector<const NetworkComponent*> components() const;
    NetworkComponent& component(const std::string& name);

    std::int64_t parameter_count() const;
    /// encoder + both decoders (the disparity-based predictor).
    std::int64_t dbp_parameter_count() const;
};

/// Encoder layer indices exposed for decoder skip connections.
inline const std::vector<int>& encoder_tap_layers() {
    static const std::vector<int> taps = {4, 8, 12, 24};
    return taps;
}

/// Input divisibility the encoder's six stride-2 stages impose.
constexpr int kEncoderDivisor = 64;

/// 27-layer depthwise-separable feature extractor; all relu6, stride-2 at
/// layers 1, 4, 8, 12, 24 and 26.
NetworkComponent build_feature_extractor(int input_channels);

/// 20-stage decoder (layers 28-47) plus one parameter-free x2 upsampling
/// inserted before layer 47 so the disparity output matches the input
/// resolution; concatenates to encoder layers 24, 12, 8, 4.
NetworkComponent build_disparity_estimator(const NetworkComponent& encoder,
                                           const std::string& name);

/// 8 stride-1 3x3 convolutions (layers 48-55); 64 filters and relu except the
/// 3-filter, activation-free output layer.
NetworkComponent build_refiner(const std::string& name);

/// 5 stride-1 3x3 convolutions (layers 56-60); 32 filters and relu except the
/// single-filter sigmoid output layer. Input: prediction (3) + disparity (1).
NetworkComponent build_cbm(const std::string& name);

constexpr int kCbmInputChannels = 4;

/// Initialize every parameter from N(0, 0.02^2) in deterministic component
/// and layer order.
void init_parameters(ModelGraph& graph, std::uint64_t seed);

/// Build and initialize the full graph. When encoder_weights_dir is given, it
/// must hold exactly the encoder's tensors (same names and shapes); its
/// values replace the random encoder initialization.
ModelGraph build_model(std::uint64_t seed, const std::string& encoder_weights_dir = "");

std::int64_t count_parameters(const NetworkComponent& c);
std::int64_t count_parameters(const ModelGraph& g);

/// Mark the named components (or the "dbp" group: encoder + both decoders)
/// as frozen / trainable. Unknown names are an error.
void freeze(ModelGraph& graph, const std::vector<std::string>& component_names);
void unfreeze(ModelGraph& graph, const std::vector<std::string>& component_names);

/// Outputs of one synthesis branch on a tape.
struct BranchForward {
    Value disparity; // (N,H,W,1)
    Value dbp;       // warped input
    Value ref;       // refined prediction (invalid in DBP-only mode)
    Value v;         // learned confidence (invalid in DBP-only mode)
    Value blended;   // final prediction (invalid in DBP-only mode)
};

/// Run one branch: encoder -> disparity -> warp [-> refiner -> cbm -> blend].
/// `direction` selects the branch: left_to_right treats `input` as the left
/// view and synthesizes the right one.
BranchForward forward_branch(Tape<float>& tape, const ModelGraph& graph, Value input,
                             WarpDirection direction, bool with_refinement);

} // namespace monoview::nn
