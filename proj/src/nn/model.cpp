#include "monoview/nn/model.hpp"

#include <algorithm>

#include "monoview/consistency.hpp"
#include "monoview/io/weights_io.hpp"
#include "monoview/rng.hpp"

namespace monoview::nn {

std::vector<NetworkComponent*> ModelGraph::components() {
    return {&encoder, &decoder_lr, &decoder_rl, &refiner_l, &refiner_r, &cbm_l, &cbm_r};
}

std::vector<const NetworkComponent*> ModelGraph::components() const {
    return {&encoder, &decoder_lr, &decoder_rl, &refiner_l, &refiner_r, &cbm_l, &cbm_r};
}

NetworkComponent& ModelGraph::component(const std::string& name) {
    for (NetworkComponent* c : components())
        if (c->name() == name) return *c;
    fail("unknown component '" + name + "'");
}

std::int64_t ModelGraph::parameter_count() const {
    std::int64_t total = 0;
    for (const NetworkComponent* c : components()) total += c->parameter_count();
    return total;
}

std::int64_t ModelGraph::dbp_parameter_count() const {
    return encoder.parameter_count() + decoder_lr.parameter_count() +
           decoder_rl.parameter_count();
}

NetworkComponent build_feature_extractor(int input_channels) {
    require(input_channels == 3, "feature extractor expects 3 input channels");
    const Activation r6 = Activation::relu6;
    std::vector<LayerSpec> layers;
    layers.push_back(conv_spec(1, 2, 32, 3, 3, r6));
    layers.push_back(depthwise_spec(2, 1, 3, 3, r6));
    layers.push_back(conv_spec(3, 1, 64, 1, 1, r6));
    layers.push_back(depthwise_spec(4, 2, 3, 3, r6));
    layers.push_back(conv_spec(5, 1, 128, 1, 1, r6));
    layers.push_back(depthwise_spec(6, 1, 3, 3, r6));
    layers.push_back(conv_spec(7, 1, 128, 1, 1, r6));
    layers.push_back(depthwise_spec(8, 2, 3, 3, r6));
    layers.push_back(conv_spec(9, 1, 256, 1, 1, r6));
    layers.push_back(depthwise_spec(10, 1, 3, 3, r6));
    layers.push_back(conv_spec(11, 1, 256, 1, 1, r6));
    layers.push_back(depthwise_spec(12, 2, 3, 3, r6));
    layers.push_back(conv_spec(13, 1, 512, 1, 1, r6));
    for (int i = 0; i < 5; ++i) { // layers 14-23: five depthwise/pointwise blocks
        layers.push_back(depthwise_spec(14 + 2 * i, 1, 3, 3, r6));
        layers.push_back(conv_spec(15 + 2 * i, 1, 512, 1, 1, r6));
    }
    layers.push_back(depthwise_spec(24, 2, 3, 3, r6));
    layers.push_back(conv_spec(25, 1, 1024, 1, 1, r6));
    layers.push_back(depthwise_spec(26, 2, 3, 3, r6));
    layers.push_back(conv_spec(27, 1, 1024, 1, 1, r6));
    return NetworkComponent("encoder", std::move(layers), input_channels,
                            encoder_tap_layers(), nullptr, kEncoderDivisor);
}

NetworkComponent build_disparity_estimator(const NetworkComponent& encoder,
                                           const std::string& name) {
    std::map<int, int> skip_channels;
    for (int tap : encoder_tap_layers()) {
        bool exposed = std::find(encoder.tap_layers().begin(),
                                 encoder.tap_layers().end(),
                                 tap) != encoder.tap_layers().end();
        require(exposed, "encoder does not expose skip activation at layer " +
                             std::to_string(tap));
        skip_channels[tap] = encoder.layer_output_channels(tap);
    }
    const Activation r6 = Activation::relu6;
    std::vector<LayerSpec> layers;
    const int concat_to[4] = {24, 12, 8, 4};
    const int filters[5] = {512, 512, 256, 128, 64};
    for (int blk = 0; blk < 5; ++blk) {
        const int base = 28 + 4 * blk;
        layers.push_back(depthwise_spec(base, 1, 3, 3, r6));
        layers.push_back(conv_spec(base + 1, 1, filters[blk], 1, 1, r6));
        layers.push_back(upsample_spec(base + 2));
        if (blk < 4) layers.push_back(concat_spec(base + 3, concat_to[blk]));
    }
    // The tables pair five x2 upsamplings against six stride-2 encoder
    // stages; one extra parameter-free x2 stage before layer 47 brings the
    // disparity back to input resolution.
    layers.push_back(upsample_spec(0));
    layers.push_back(conv_spec(47, 1, 1, 2, 2, Activation::relu));
    return NetworkComponent(name, std::move(layers), encoder.output_channels(), {},
                            &skip_channels);
}

NetworkComponent build_refiner(const std::string& name) {
    std::vector<LayerSpec> layers;
    for (int i = 48; i <= 54; ++i)
        layers.push_back(conv_spec(i, 1, 64, 3, 3, Activation::relu));
    layers.push_back(conv_spec(55, 1, 3, 3, 3, Activation::none));
    return NetworkComponent(name, std::move(layers), 3);
}

NetworkComponent build_cbm(const std::string& name) {
    std::vector<LayerSpec> layers;
    for (int i = 56; i <= 59; ++i)
        layers.push_back(conv_spec(i, 1, 32, 3, 3, Activation::relu));
    // Table row 60 lists 32 filters, but the blend weight is a per-pixel
    // scalar; one filter here.
    layers.push_back(conv_spec(60, 1, 1, 3, 3, Activation::sigmoid));
    return NetworkComponent(name, std::move(layers), kCbmInputChannels);
}

void init_parameters(ModelGraph& graph, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x6d6f6e6f)); // stream tag for init
    for (NetworkComponent* c : graph.components())
        for (ParamEntry& e : c->params().entries()) {
            float* p = e.value.data();
            for (std::int64_t i = 0; i < e.value.size(); ++i)
                p[i] = static_cast<float>(rng.normal(0.0, 0.02));
        }
}

ModelGraph build_model(std::uint64_t seed, const std::string& encoder_weights_dir) {
    ModelGraph g;
    g.encoder = build_feature_extractor(3);
    g.decoder_lr = build_disparity_estimator(g.encoder, "decoder_lr");
    g.decoder_rl = build_disparity_estimator(g.encoder, "decoder_rl");
    g.refiner_l = build_refiner("refiner_l");
    g.refiner_r = build_refiner("refiner_r");
    g.cbm_l = build_cbm("cbm_l");
    g.cbm_r = build_cbm("cbm_r");
    init_parameters(g, seed);

    if (!encoder_weights_dir.empty()) {
        auto loaded = io::load_tensor_map(encoder_weights_dir);
        ParameterStore& store = g.encoder.params();
        for (const auto& [name, tensor] : loaded) {
            require(store.has(name), "encoder weights: unexpected tensor '" + name + "'");
            ParamEntry& e = store.entry(name);
            require(e.value.shape() == tensor.shape(),
                    "encoder weights: tensor '" + name + "' has shape " +
                        tensor.shape().str() + ", expected " + e.value.shape().str());
            e.value = tensor;
        }
        for (const ParamEntry& e : store.entries())
            require(loaded.count(e.name),
                    "encoder weights: missing tensor '" + e.name + "'");
    }
    return g;
}

std::int64_t count_parameters(const NetworkComponent& c) { return c.parameter_count(); }

std::int64_t count_parameters(const ModelGraph& g) { return g.parameter_count(); }

namespace {

void set_frozen(ModelGraph& graph, const std::vector<std::string>& names, bool frozen) {
    for (const std::string& name : names) {
        if (name == "dbp") {
            graph.encoder.params().set_trainable(!frozen);
            graph.decoder_lr.params().set_trainable(!frozen);
            graph.decoder_rl.params().set_trainable(!frozen);
        } else {
            graph.component(name).params().set_trainable(!frozen);
        }
    }
}

} // namespace

void freeze(ModelGraph& graph, const std::vector<std::string>& component_names) {
    set_frozen(graph, component_names, true);
}

void unfreeze(ModelGraph& graph, const std::vector<std::string>& component_names) {
    set_frozen(graph, component_names, false);
}

BranchForward forward_branch(Tape<float>& tape, const ModelGraph& graph, Value input,
                             WarpDirection direction, bool with_refinement) {
    const bool lr = direction == WarpDirection::left_to_right;
    const NetworkComponent& decoder = lr ? graph.decoder_lr : graph.decoder_rl;
    const NetworkComponent& refiner = lr ? graph.refiner_r : graph.refiner_l;
    const NetworkComponent& cbm = lr ? graph.cbm_r : graph.cbm_l;

    BranchForward out;
    ForwardTaps enc = graph.encoder.forward(tape, input);
    out.disparity = decoder.forward(tape, enc.out, &enc.taps).out;
    out.dbp = ops::warp(tape, input, out.disparity, direction);
    if (with_refinement) {
        out.ref = refiner.forward(tape, out.dbp).out;
        out.v = cbm.forward(tape, ops::concat_c(tape, out.dbp, out.disparity)).out;
        out.blended = ops::blend(tape, out.dbp, out.ref, out.v);
    }
    return out;
}

} // namespace monoview::nn
