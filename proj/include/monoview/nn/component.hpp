#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "monoview/autodiff.hpp"

namespace monoview::nn {

enum class LayerKind { conv, depthwise_conv, upsample, concat };
enum class Activation { relu, relu6, sigmoid, none };

std::string to_string(LayerKind k);
std::string to_string(Activation a);

/// One row of the architecture tables. index is the table's "Number" column;
/// stages inserted outside the tables carry index 0.
struct LayerSpec {
    int index = 0;
    LayerKind kind = LayerKind::conv;
    int stride = 1;
    int filters = 0;       // 0 = no filter count (depthwise/upsample/concat)
    int kernel_h = 0, kernel_w = 0;
    Activation activation = Activation::none;
    int concat_target = -1; // encoder layer index to concatenate with

    /// Canonical one-line encoding, used for the table audit and `inspect`.
    std::string serialize() const;
};

LayerSpec conv_spec(int index, int stride, int filters, int kh, int kw, Activation a);
LayerSpec depthwise_spec(int index, int stride, int kh, int kw, Activation a);
LayerSpec upsample_spec(int index);
LayerSpec concat_spec(int index, int target_layer);

struct ParamEntry {
    std::string name;
    Tensorf value;
    mutable Tensorf grad; // scratch, written during backward
    bool trainable = true;
};

/// Ordered named tensor store. Order is creation order and fixed by the
/// layer list, which makes initialization and serialization deterministic.
class ParameterStore {
public:
    Tensorf& add(const std::string& name, const Shape& shape);
    bool has(const std::string& name) const;
    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;
    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::int64_t scalar_count() const;
    void zero_grads() const;
    void set_trainable(bool trainable);

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ForwardTaps {
    Value out;
    std::map<int, Value> taps; // layer index -> activation
};

/// A parameterized differentiable function: ordered layer list plus its
/// parameter store. Channel bookkeeping and parameter allocation happen at
/// construction; concat channel mismatches are construction-time errors.
class NetworkComponent {
public:
    NetworkComponent() = default;
    /// skip_channels: channel count per concat-target layer (for components
    /// that concatenate activations produced elsewhere).
    /// tap_layers: layer indices whose activations forward() exposes.
    /// input_divisor: both input dimensions must be divisible by this.
    NetworkComponent(std::string name, std::vector<LayerSpec> layers,
                     int input_channels, std::vector<int> tap_layers = {},
                     const std::map<int, int>* skip_channels = nullptr,
                     int input_divisor = 1);

    /// Run the component on `input`; `skips` supplies concat-target
    /// activations (shapes validated here). Deterministic given parameters.
    ForwardTaps forward(Tape<float>& tape, Value input,
                        const std::map<int, Value>* skips = nullptr) const;

    const std::string& name() const { return name_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    std::int64_t parameter_count() const { return params_.scalar_count(); }
    int input_channels() const { return input_channels_; }
    int output_channels() const { return out_channels_.empty() ? input_channels_ : out_channels_.back(); }
    int input_divisor() const { return input_divisor_; }
    const std::vector<int>& tap_layers() const { return tap_layers_; }
    /// Output channel count of a table layer (by layer index).
    int layer_output_channels(int layer_index) const;

private:
    std::string name_;
    std::vector<LayerSpec> layers_;
    std::vector<int> out_channels_; // per position in layers_
    std::vector<int> tap_layers_;
    int input_channels_ = 0;
    int input_divisor_ = 1;
    ParameterStore params_;
};

} // namespace monoview::nn
