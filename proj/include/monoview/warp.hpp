#pragma once

#include <string>

#include "monoview/autodiff.hpp"
#include "monoview/rng.hpp"

namespace monoview {

/// Horizontal warp direction. left_to_right samples the source at x + d
/// (synthesizing a right view from a left image); right_to_left samples at
/// x - d. Disparities are non-negative in both cases.
enum class WarpDirection { left_to_right, right_to_left };

inline int warp_sign(WarpDirection d) {
    return d == WarpDirection::left_to_right ? 1 : -1;
}

inline std::string to_string(WarpDirection d) {
    return d == WarpDirection::left_to_right ? "left_to_right" : "right_to_left";
}

namespace detail {

/// out(x,y,c) = bilinear sample of source at (x + sign*d(x,y), y), sampling
/// coordinates clamped to the image border (replicate edge).
template <typename T>
void warp_fwd(const Tensor<T>& src, const Tensor<T>& disp, int sign, Tensor<T>& out) {
    const int N = src.n(), H = src.h(), W = src.w(), C = src.c();
    out = Tensor<T>(src.shape());
    for (int n = 0; n < N; ++n)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                T u = static_cast<T>(x) + static_cast<T>(sign) * disp.at(n, y, x, 0);
                if (u < T(0)) u = T(0);
                if (u > T(W - 1)) u = T(W - 1);
                const int x0 = static_cast<int>(std::floor(u));
                const int x1 = std::min(x0 + 1, W - 1);
                const T f = u - static_cast<T>(x0);
                const T* s0 = src.data() + src.idx(n, y, x0, 0);
                const T* s1 = src.data() + src.idx(n, y, x1, 0);
                T* o = out.data() + out.idx(n, y, x, 0);
                for (int c = 0; c < C; ++c)
                    o[c] = (T(1) - f) * s0[c] + f * s1[c];
            }
}

/// Gradients of warp_fwd. d(out)/d(u) uses the right-sided subgradient at
/// integer sampling positions; the clamp zeroes the disparity gradient once
/// the unclamped coordinate leaves [0, W-1].
template <typename T>
void warp_bwd(const Tensor<T>& src, const Tensor<T>& disp, int sign,
              const Tensor<T>& gout, Tensor<T>* gsrc, Tensor<T>* gdisp) {
    const int N = src.n(), H = src.h(), W = src.w(), C = src.c();
    for (int n = 0; n < N; ++n)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const T u_raw = static_cast<T>(x) + static_cast<T>(sign) * disp.at(n, y, x, 0);
                const bool clamped = (u_raw <= T(0)) || (u_raw >= T(W - 1));
                T u = u_raw;
                if (u < T(0)) u = T(0);
                if (u > T(W - 1)) u = T(W - 1);
                const int x0 = static_cast<int>(std::floor(u));
                const int x1 = std::min(x0 + 1, W - 1);
                const T f = u - static_cast<T>(x0);
                const T* g = gout.data() + gout.idx(n, y, x, 0);
                if (gsrc) {
                    T* d0 = gsrc->data() + gsrc->idx(n, y, x0, 0);
                    T* d1 = gsrc->data() + gsrc->idx(n, y, x1, 0);
                    for (int c = 0; c < C; ++c) {
                        d0[c] += (T(1) - f) * g[c];
                        d1[c] += f * g[c];
                    }
                }
                if (gdisp && !clamped) {
                    const T* s0 = src.data() + src.idx(n, y, x0, 0);
                    const T* s1 = src.data() + src.idx(n, y, x1, 0);
                    T acc = T(0);
                    for (int c = 0; c < C; ++c) acc += g[c] * (s1[c] - s0[c]);
                    gdisp->at(n, y, x, 0) += static_cast<T>(sign) * acc;
                }
            }
}

} // namespace detail

namespace ops {

/// Differentiable horizontal warp (parameter-free spatial transformer).
/// source (N,H,W,C), disparity (N,H,W,1) >= 0.
template <typename T>
Value warp(Tape<T>& t, Value source, Value disparity, WarpDirection dir) {
    const Tensor<T>& src = t.value(source);
    const Tensor<T>& d = t.value(disparity);
    require(d.c() == 1, "warp: disparity must have a single channel");
    require(src.n() == d.n() && src.h() == d.h() && src.w() == d.w(),
            "warp: source " + src.shape().str() + " and disparity " +
                d.shape().str() + " disagree");
    const int sign = warp_sign(dir);
    Tensor<T> out;
    monoview::detail::warp_fwd(src, d, sign, out);
    const bool ngs = t.needs_grad(source), ngd = t.needs_grad(disparity);
    if (!ngs && !ngd) return t.constant(std::move(out));
    const int oid = t.next_id();
    return t.push(std::move(out), true,
                  [source, disparity, oid, sign, ngs, ngd](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        monoview::detail::warp_bwd(t2.value(source), t2.value(disparity), sign, g,
                                   ngs ? &t2.grad_buf(source) : nullptr,
                                   ngd ? &t2.grad_buf(disparity) : nullptr);
    });
}

} // namespace ops

/// Plain (non-tape) warp.
template <typename T>
Tensor<T> warp(const Tensor<T>& source, const Tensor<T>& disparity, WarpDirection dir) {
    require(disparity.c() == 1, "warp: disparity must have a single channel");
    require(source.n() == disparity.n() && source.h() == disparity.h() &&
                source.w() == disparity.w(),
            "warp: source " + source.shape().str() + " and disparity " +
                disparity.shape().str() + " disagree");
    Tensor<T> out;
    detail::warp_fwd(source, disparity, warp_sign(dir), out);
    return out;
}

struct GradCheckReport {
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string worst; // human-readable worst coordinate
};

/// Central finite-difference check of the analytic warp gradients on a small
/// random double-precision instance. Disparities are drawn strictly inside
/// (0.2, 0.7): sampling positions stay away from the bilinear kinks at
/// integer coordinates and from the clamp boundary by far more than `step`.
GradCheckReport warp_gradient_check(double step, double tolerance,
                                    std::uint64_t seed = 7);

} // namespace monoview
