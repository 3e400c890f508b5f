#pragma once

#include <string>
#include <utility>
#include <vector>

#include "monoview/autodiff.hpp"
#include "monoview/consistency.hpp"

namespace monoview {

/// Loss-term weights with the published defaults.
template <typename T>
struct LossWeightsT {
    T lambda0 = T(0.80);  // phase I: pixel l1
    T lambda1 = T(0.20);  // phase I: gradient l1
    T lambda2 = T(0.85);  // phase II: normalized disparity-gradient match
    T lambda3 = T(0.15);  // phase II: pixel l1
    T lambda4 = T(0.25);  // phase III: REF pixel l1
    T lambda5 = T(0.05);  // phase III: REF gradient l1
    T lambda6 = T(0.50);  // phase III: final pixel l1
    T lambda7 = T(0.13);  // phase III: final gradient l1
    T lambda8 = T(0.035); // phase III: confidence regression
};

using LossWeights = LossWeightsT<float>;

template <typename T>
struct LossResult {
    Value total;
    // weighted term contributions, in definition order; they sum to total
    std::vector<std::pair<std::string, T>> terms;
};

/// Plain forward-difference image gradient: dx(x,y) = t(x+1,y) - t(x,y) with
/// the last column zero, and likewise dy with the last row zero.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> image_gradient(const Tensor<T>& t) {
    require(t.h() >= 2 && t.w() >= 2, "image_gradient: needs H,W >= 2");
    Tape<T> tape;
    Value v = tape.constant(t);
    return {tape.value(ops::grad_x(tape, v)), tape.value(ops::grad_y(tape, v))};
}

namespace ops {

/// mean |a - b|
template <typename T>
Value l1_mean(Tape<T>& t, Value a, Value b) {
    return mean(t, vabs(t, sub(t, a, b)));
}

/// l1 of the forward-difference gradients, averaged over both derivative
/// components (i.e. the mean over the stacked 2*H*W*C elements).
template <typename T>
Value gradient_l1(Tape<T>& t, Value a, Value b) {
    Value gx = l1_mean(t, grad_x(t, a), grad_x(t, b));
    Value gy = l1_mean(t, grad_y(t, a), grad_y(t, b));
    return scale(t, add(t, gx, gy), T(0.5));
}

/// Phase I objective:
///   lambda0 (|L_DBP-L| + |R_DBP-R|) + lambda1 (gradient terms), all mean-l1.
template <typename T>
LossResult<T> loss_phase1(Tape<T>& t, Value L, Value R, Value L_dbp, Value R_dbp,
                          const LossWeightsT<T>& w) {
    Value pix = scale(t, add(t, l1_mean(t, L_dbp, L), l1_mean(t, R_dbp, R)), w.lambda0);
    Value grd = scale(t, add(t, gradient_l1(t, L_dbp, L), gradient_l1(t, R_dbp, R)),
                      w.lambda1);
    Value total = add(t, pix, grd);
    return {total, {{"pix", t.value(pix)[0]}, {"grad", t.value(grd)[0]}}};
}

namespace detail {

/// || s * grad(d) - grad(img) ||_1 with the single disparity channel
/// broadcast across the image channels.
template <typename T>
Value disparity_gradient_match(Tape<T>& t, Value d, Value img, T s) {
    const int channels = t.value(img).c();
    Value sdx = repeat_c(t, scale(t, grad_x(t, d), s), channels);
    Value sdy = repeat_c(t, scale(t, grad_y(t, d), s), channels);
    Value mx = mean(t, vabs(t, sub(t, sdx, grad_x(t, img))));
    Value my = mean(t, vabs(t, sub(t, sdy, grad_y(t, img))));
    return scale(t, add(t, mx, my), T(0.5));
}

} // namespace detail

/// Phase II objective with explicit normalization scales (2/max(d), already
/// detached from differentiation). The public overload computes the scales.
template <typename T>
LossResult<T> loss_phase2_scaled(Tape<T>& t, Value L, Value R, Value L_dbp,
                                 Value R_dbp, Value d_lr, Value d_rl,
                                 T scale_rl, T scale_lr, const LossWeightsT<T>& w) {
    // d_RL lives on the left-view grid, d_LR on the right-view grid
    Value dg = scale(t,
                     add(t, detail::disparity_gradient_match(t, d_rl, L, scale_rl),
                         detail::disparity_gradient_match(t, d_lr, R, scale_lr)),
                     w.lambda2);
    Value pix = scale(t, add(t, l1_mean(t, L_dbp, L), l1_mean(t, R_dbp, R)), w.lambda3);
    Value total = add(t, dg, pix);
    return {total, {{"disp_grad", t.value(dg)[0]}, {"pix", t.value(pix)[0]}}};
}

/// Normalization scale for Eq.-style disparity gradients: 2 / max(d), with an
/// epsilon floor guarding all-zero maps. Computed per map, per batch sample
/// joint (max over the whole tensor), treated as a constant.
template <typename T>
T disparity_norm_scale(const Tensor<T>& d) {
    T m = T(0);
    for (std::int64_t i = 0; i < d.size(); ++i) m = std::max(m, d[i]);
    return T(2) / std::max(m, T(1e-6));
}

template <typename T>
LossResult<T> loss_phase2(Tape<T>& t, Value L, Value R, Value L_dbp, Value R_dbp,
                          Value d_lr, Value d_rl, const LossWeightsT<T>& w) {
    const T s_rl = disparity_norm_scale(t.value(d_rl));
    const T s_lr = disparity_norm_scale(t.value(d_lr));
    return loss_phase2_scaled(t, L, R, L_dbp, R_dbp, d_lr, d_rl, s_rl, s_lr, w);
}

/// Phase III objective. Blends are built internally from (dbp, ref, v) so the
/// gradient reaches all of them; C maps are targets computed from the frozen
/// disparities and enter as constants.
template <typename T>
LossResult<T> loss_phase3(Tape<T>& t, Value L, Value R, Value L_dbp, Value R_dbp,
                          Value L_ref, Value R_ref, Value v_rl, Value v_lr,
                          Value c_lr, Value c_rl, const LossWeightsT<T>& w) {
    Value L_star = blend(t, L_dbp, L_ref, v_rl);
    Value R_star = blend(t, R_dbp, R_ref, v_lr);
    Value ref_pix =
        scale(t, add(t, l1_mean(t, L_ref, L), l1_mean(t, R_ref, R)), w.lambda4);
    Value ref_grd = scale(
        t, add(t, gradient_l1(t, L_ref, L), gradient_l1(t, R_ref, R)), w.lambda5);
    Value fin_pix =
        scale(t, add(t, l1_mean(t, L_star, L), l1_mean(t, R_star, R)), w.lambda6);
    Value fin_grd = scale(
        t, add(t, gradient_l1(t, L_star, L), gradient_l1(t, R_star, R)), w.lambda7);
    Value one_minus_clr = affine(t, c_lr, T(-1), T(1));
    Value one_minus_crl = affine(t, c_rl, T(-1), T(1));
    Value conf = scale(t,
                       add(t, l1_mean(t, v_lr, one_minus_clr),
                           l1_mean(t, v_rl, one_minus_crl)),
                       w.lambda8);
    Value total = add(t, add(t, add(t, ref_pix, ref_grd), add(t, fin_pix, fin_grd)), conf);
    return {total,
            {{"ref_pix", t.value(ref_pix)[0]},
             {"ref_grad", t.value(ref_grd)[0]},
             {"final_pix", t.value(fin_pix)[0]},
             {"final_grad", t.value(fin_grd)[0]},
             {"conf", t.value(conf)[0]}}};
}

} // namespace ops

} // namespace monoview
