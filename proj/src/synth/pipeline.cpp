#include "monoview/synth/pipeline.hpp"

#include <algorithm>

namespace monoview::synth {

Tensorf pad_to_multiple(const Tensorf& image, int multiple) {
    const int H = image.h(), W = image.w();
    const int ph = (H % multiple == 0) ? H : (H / multiple + 1) * multiple;
    const int pw = (W % multiple == 0) ? W : (W / multiple + 1) * multiple;
    if (ph == H && pw == W) return image;
    require(ph - H < H && pw - W < W,
            "image too small to reflection-pad to a multiple of " +
                std::to_string(multiple));
    Tensorf out(image.n(), ph, pw, image.c());
    const int C = image.c();
    for (int n = 0; n < image.n(); ++n)
        for (int y = 0; y < ph; ++y) {
            const int sy = y < H ? y : 2 * H - 1 - y; // mirror including edge
            for (int x = 0; x < pw; ++x) {
                const int sx = x < W ? x : 2 * W - 1 - x;
                for (int c = 0; c < C; ++c)
                    out.at(n, y, x, c) = image.at(n, sy, sx, c);
            }
        }
    return out;
}

Tensorf crop_to(const Tensorf& t, int h, int w) {
    if (t.h() == h && t.w() == w) return t;
    require(t.h() >= h && t.w() >= w, "crop_to: target larger than tensor");
    Tensorf out(t.n(), h, w, t.c());
    const int C = t.c();
    for (int n = 0; n < t.n(); ++n)
        for (int y = 0; y < h; ++y)
            std::copy_n(t.data() + t.idx(n, y, 0, 0),
                        static_cast<std::size_t>(w) * C,
                        out.data() + out.idx(n, y, 0, 0));
    return out;
}

PredictionBundle synthesize(const nn::ModelGraph& model, const Tensorf& input,
                            WarpDirection direction) {
    require(input.n() == 1 && input.c() == 3, "synthesize: input must be (1,H,W,3)");
    const int H = input.h(), W = input.w();
    const Tensorf padded = pad_to_multiple(input, nn::kEncoderDivisor);

    Tape<float> tape;
    tape.set_grad_enabled(false);
    Value in = tape.constant(padded);
    nn::BranchForward fwd = nn::forward_branch(tape, model, in, direction,
                                               /*with_refinement=*/true);
    PredictionBundle bundle;
    bundle.input = input;
    bundle.disparity = crop_to(tape.value(fwd.disparity), H, W);
    bundle.dbp = crop_to(tape.value(fwd.dbp), H, W);
    bundle.ref = crop_to(tape.value(fwd.ref), H, W);
    bundle.v = crop_to(tape.value(fwd.v), H, W);
    bundle.blended = crop_to(tape.value(fwd.blended), H, W);
    return bundle;
}

std::vector<InterpolationFrame> interpolate(const nn::ModelGraph& model,
                                            const Tensorf& input,
                                            WarpDirection direction,
                                            const std::vector<float>& alphas) {
    require(input.n() == 1 && input.c() == 3, "interpolate: input must be (1,H,W,3)");
    require(std::is_sorted(alphas.begin(), alphas.end()), "alphas must be ascending");
    for (float a : alphas)
        require(a >= 0.0f && a <= 1.0f, "alphas must lie in [0,1]");
    const int H = input.h(), W = input.w();
    const Tensorf padded = pad_to_multiple(input, nn::kEncoderDivisor);
    const bool lr = direction == WarpDirection::left_to_right;
    const nn::NetworkComponent& refiner = lr ? model.refiner_r : model.refiner_l;
    const nn::NetworkComponent& cbm = lr ? model.cbm_r : model.cbm_l;

    // full-scale disparity from the pre-trained DBP, once
    Tape<float> tape;
    tape.set_grad_enabled(false);
    Value in = tape.constant(padded);
    nn::ForwardTaps enc = model.encoder.forward(tape, in);
    const nn::NetworkComponent& decoder = lr ? model.decoder_lr : model.decoder_rl;
    Value disparity = decoder.forward(tape, enc.out, &enc.taps).out;

    std::vector<InterpolationFrame> frames;
    frames.reserve(alphas.size());
    for (float alpha : alphas) {
        Value scaled = ops::scale(tape, disparity, alpha);
        Value warped = ops::warp(tape, in, scaled, direction);
        Value refined = refiner.forward(tape, warped).out;
        Value v = cbm.forward(tape, ops::concat_c(tape, warped, scaled)).out;
        Value blended = ops::blend(tape, warped, refined, v);

        InterpolationFrame frame;
        frame.alpha = alpha;
        frame.warped = crop_to(tape.value(warped), H, W);
        frame.blended = crop_to(tape.value(blended), H, W);
        frame.v = crop_to(tape.value(v), H, W);
        frame.disparity = crop_to(tape.value(scaled), H, W);
        frames.push_back(std::move(frame));
    }
    return frames;
}

} // namespace monoview::synth
