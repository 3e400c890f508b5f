#include "monoview/nn/component.hpp"

#include <sstream>

namespace monoview::nn {

std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::depthwise_conv: return "depthwise";
        case LayerKind::upsample: return "upsample";
        case LayerKind::concat: return "concat";
    }
    return "?";
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::relu6: return "relu6";
        case Activation::sigmoid: return "sigmoid";
        case Activation::none: return "none";
    }
    return "?";
}

std::string LayerSpec::serialize() const {
    std::ostringstream os;
    if (index > 0)
        os << index;
    else
        os << "--"; // stage inserted outside the tables
    os << " " << to_string(kind);
    switch (kind) {
        case LayerKind::conv:
            os << " s" << stride << " f" << filters << " k" << kernel_h << "x"
               << kernel_w << " " << to_string(activation);
            break;
        case LayerKind::depthwise_conv:
            os << " s" << stride << " k" << kernel_h << "x" << kernel_w << " "
               << to_string(activation);
            break;
        case LayerKind::upsample:
            os << " x" << stride;
            break;
        case LayerKind::concat:
            os << " ->" << concat_target;
            break;
    }
    return os.str();
}

LayerSpec conv_spec(int index, int stride, int filters, int kh, int kw, Activation a) {
    LayerSpec s;
    s.index = index;
    s.kind = LayerKind::conv;
    s.stride = stride;
    s.filters = filters;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.activation = a;
    return s;
}

LayerSpec depthwise_spec(int index, int stride, int kh, int kw, Activation a) {
    LayerSpec s;
    s.index = index;
    s.kind = LayerKind::depthwise_conv;
    s.stride = stride;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.activation = a;
    return s;
}

LayerSpec upsample_spec(int index) {
    LayerSpec s;
    s.index = index;
    s.kind = LayerKind::upsample;
    s.stride = 2;
    s.activation = Activation::none;
    return s;
}

LayerSpec concat_spec(int index, int target_layer) {
    LayerSpec s;
    s.index = index;
    s.kind = LayerKind::concat;
    s.stride = 1;
    s.activation = Activation::none;
    s.concat_target = target_layer;
    return s;
}

Tensorf& ParameterStore::add(const std::string& name, const Shape& shape) {
    require(!has(name), "parameter '" + name + "' already exists");
    ParamEntry e;
    e.name = name;
    e.value = Tensorf(shape);
    e.grad = Tensorf(shape);
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().value;
}

bool ParameterStore::has(const std::string& name) const {
    return index_.count(name) != 0;
}

ParamEntry& ParameterStore::entry(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return entries_[it->second];
}

const ParamEntry& ParameterStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return entries_[it->second];
}

std::int64_t ParameterStore::scalar_count() const {
    std::int64_t total = 0;
    for (const auto& e : entries_) total += e.value.size();
    return total;
}

void ParameterStore::zero_grads() const {
    for (const auto& e : entries_) e.grad.zero();
}

void ParameterStore::set_trainable(bool trainable) {
    for (auto& e : entries_) e.trainable = trainable;
}

namespace {

std::string weight_name(const LayerSpec& s) { return "w" + std::to_string(s.index); }
std::string bias_name(const LayerSpec& s) { return "b" + std::to_string(s.index); }

Value apply_activation(Tape<float>& tape, Value v, Activation a) {
    switch (a) {
        case Activation::relu: return ops::relu(tape, v);
        case Activation::relu6: return ops::relu6(tape, v);
        case Activation::sigmoid: return ops::sigmoid(tape, v);
        case Activation::none: return v;
    }
    return v;
}

} // namespace

NetworkComponent::NetworkComponent(std::string name, std::vector<LayerSpec> layers,
                                   int input_channels, std::vector<int> tap_layers,
                                   const std::map<int, int>* skip_channels,
                                   int input_divisor)
    : name_(std::move(name)),
      layers_(std::move(layers)),
      tap_layers_(std::move(tap_layers)),
      input_channels_(input_channels),
      input_divisor_(input_divisor) {
    int ch = input_channels;
    out_channels_.reserve(layers_.size());
    for (const LayerSpec& s : layers_) {
        switch (s.kind) {
            case LayerKind::conv:
                require(s.filters > 0, name_ + ": conv layer " + std::to_string(s.index) +
                                           " needs a filter count");
                params_.add(weight_name(s), Shape{s.kernel_h, s.kernel_w, ch, s.filters});
                params_.add(bias_name(s), Shape{1, 1, 1, s.filters});
                ch = s.filters;
                break;
            case LayerKind::depthwise_conv:
                require(s.filters == 0, name_ + ": depthwise layer " +
                                            std::to_string(s.index) +
                                            " must not carry a filter count");
                params_.add(weight_name(s), Shape{s.kernel_h, s.kernel_w, ch, 1});
                params_.add(bias_name(s), Shape{1, 1, 1, ch});
                break;
            case LayerKind::upsample:
                require(s.stride == 2, name_ + ": upsample layers are x2");
                break;
            case LayerKind::concat: {
                require(s.concat_target > 0,
                        name_ + ": concat layer " + std::to_string(s.index) +
                            " needs a target");
                require(skip_channels && skip_channels->count(s.concat_target),
                        name_ + ": concat layer " + std::to_string(s.index) +
                            " targets layer " + std::to_string(s.concat_target) +
                            " which provides no activation");
                ch += skip_channels->at(s.concat_target);
                break;
            }
        }
        out_channels_.push_back(ch);
    }
}

int NetworkComponent::layer_output_channels(int layer_index) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].index == layer_index) return out_channels_[i];
    fail(name_ + ": no layer with index " + std::to_string(layer_index));
}

ForwardTaps NetworkComponent::forward(Tape<float>& tape, Value input,
                                      const std::map<int, Value>* skips) const {
    const Tensorf& in = tape.value(input);
    require(in.c() == input_channels_,
            name_ + ": expected " + std::to_string(input_channels_) +
                " input channels, got " + std::to_string(in.c()));
    if (input_divisor_ > 1)
        require(in.h() % input_divisor_ == 0 && in.w() % input_divisor_ == 0,
                name_ + ": input " + std::to_string(in.h()) + "x" +
                    std::to_string(in.w()) + " not divisible by " +
                    std::to_string(input_divisor_));

    ForwardTaps result;
    Value cur = input;
    for (const LayerSpec& s : layers_) {
        switch (s.kind) {
            case LayerKind::conv: {
                const ParamEntry& w = params_.entry(weight_name(s));
                const ParamEntry& b = params_.entry(bias_name(s));
                Value wv = tape.leaf(w.value, w.trainable ? &w.grad : nullptr);
                Value bv = tape.leaf(b.value, b.trainable ? &b.grad : nullptr);
                cur = ops::conv2d(tape, cur, wv, bv, s.stride);
                cur = apply_activation(tape, cur, s.activation);
                break;
            }
            case LayerKind::depthwise_conv: {
                const ParamEntry& w = params_.entry(weight_name(s));
                const ParamEntry& b = params_.entry(bias_name(s));
                Value wv = tape.leaf(w.value, w.trainable ? &w.grad : nullptr);
                Value bv = tape.leaf(b.value, b.trainable ? &b.grad : nullptr);
                cur = ops::depthwise_conv2d(tape, cur, wv, bv, s.stride);
                cur = apply_activation(tape, cur, s.activation);
                break;
            }
            case LayerKind::upsample:
                cur = ops::upsample2(tape, cur);
                break;
            case LayerKind::concat: {
                require(skips && skips->count(s.concat_target),
                        name_ + ": forward needs skip activation for layer " +
                            std::to_string(s.concat_target));
                cur = ops::concat_c(tape, cur, skips->at(s.concat_target));
                break;
            }
        }
        for (int tap : tap_layers_)
            if (tap == s.index) result.taps[tap] = cur;
    }
    result.out = cur;
    return result;
}

} // namespace monoview::nn
