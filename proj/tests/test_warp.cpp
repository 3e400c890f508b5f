#include <doctest.h>

#include "monoview/gradcheck.hpp"
#include "monoview/warp.hpp"
#include "test_util.hpp"

using namespace monoview;

TEST_CASE("zero disparity is an exact identity in both directions") {
    for (int trial = 0; trial < 8; ++trial) {
        Tensorf img = testutil::random_tensor<float>({1, 5, 7, 3}, 100 + trial, -1.0f, 1.0f);
        Tensorf zero(1, 5, 7, 1);
        for (WarpDirection dir :
             {WarpDirection::left_to_right, WarpDirection::right_to_left}) {
            Tensorf out = warp(img, zero, dir);
            CHECK(testutil::max_abs_diff(out, img) == 0.0);
        }
    }
}

TEST_CASE("hand-evaluated ramp: integer disparity with border clamp") {
    Tensord src(1, 1, 4, 1);
    for (int i = 0; i < 4; ++i) src[i] = i; // [0,1,2,3]
    Tensord d = Tensord::full({1, 1, 4, 1}, 1.0);
    Tensord out = warp(src, d, WarpDirection::left_to_right);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 2.0);
    CHECK(out[2] == 3.0);
    CHECK(out[3] == 3.0); // clamped at the border
}

TEST_CASE("hand-evaluated ramp: fractional disparity averages neighbors") {
    Tensord src(1, 1, 4, 1);
    for (int i = 0; i < 4; ++i) src[i] = i;
    Tensord d = Tensord::full({1, 1, 4, 1}, 0.5);
    Tensord out = warp(src, d, WarpDirection::left_to_right);
    CHECK(out[0] == 0.5);
    CHECK(out[1] == 1.5);
    CHECK(out[2] == 2.5);
    CHECK(out[3] == 3.0);
}

TEST_CASE("right_to_left samples at x - d") {
    Tensord src(1, 1, 4, 1);
    for (int i = 0; i < 4; ++i) src[i] = i;
    Tensord d = Tensord::full({1, 1, 4, 1}, 1.0);
    Tensord out = warp(src, d, WarpDirection::right_to_left);
    CHECK(out[0] == 0.0); // clamped
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 1.0);
    CHECK(out[3] == 2.0);
}

TEST_CASE("linearity in the source for fixed disparity") {
    Tensord i1 = testutil::random_tensor<double>({1, 4, 6, 2}, 7, -1.0, 1.0);
    Tensord i2 = testutil::random_tensor<double>({1, 4, 6, 2}, 8, -1.0, 1.0);
    Tensord d = testutil::random_tensor<double>({1, 4, 6, 1}, 9, 0.0, 2.0);
    const double a = 0.75, b = -1.25;
    Tensord combo(i1.shape());
    for (std::int64_t i = 0; i < combo.size(); ++i) combo[i] = a * i1[i] + b * i2[i];
    Tensord w1 = warp(i1, d, WarpDirection::left_to_right);
    Tensord w2 = warp(i2, d, WarpDirection::left_to_right);
    Tensord wc = warp(combo, d, WarpDirection::left_to_right);
    for (std::int64_t i = 0; i < wc.size(); ++i)
        CHECK(wc[i] == doctest::Approx(a * w1[i] + b * w2[i]).epsilon(1e-12));
}

TEST_CASE("locality: output rows depend only on the same source row") {
    Tensord src = testutil::random_tensor<double>({1, 5, 6, 1}, 17, -1.0, 1.0);
    Tensord d = testutil::random_tensor<double>({1, 5, 6, 1}, 18, 0.0, 2.0);
    Tensord base = warp(src, d, WarpDirection::left_to_right);
    Tensord poked = src;
    for (int x = 0; x < 6; ++x) poked.at(0, 2, x, 0) += 5.0; // perturb row 2 only
    Tensord out = warp(poked, d, WarpDirection::left_to_right);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) {
            if (y == 2) continue;
            CHECK(out.at(0, y, x, 0) == base.at(0, y, x, 0));
        }
}

TEST_CASE("range preservation: convex weights and clamped indices") {
    Tensord src = testutil::random_tensor<double>({1, 4, 8, 1}, 27, -3.0, 5.0);
    Tensord d = testutil::random_tensor<double>({1, 4, 8, 1}, 28, 0.0, 6.0);
    double lo = 1e9, hi = -1e9;
    for (std::int64_t i = 0; i < src.size(); ++i) {
        lo = std::min(lo, src[i]);
        hi = std::max(hi, src[i]);
    }
    for (WarpDirection dir :
         {WarpDirection::left_to_right, WarpDirection::right_to_left}) {
        Tensord out = warp(src, d, dir);
        for (std::int64_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] >= lo);
            CHECK(out[i] <= hi);
        }
    }
}

TEST_CASE("warp_gradient_check passes at the documented tolerance") {
    GradCheckReport rep = warp_gradient_check(1e-5, 1e-4);
    CHECK_MESSAGE(rep.passed, rep.worst);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("constant image: disparity gradient is zero everywhere") {
    Tensord src = Tensord::full({1, 3, 5, 2}, 0.625);
    Tensord d = Tensord::full({1, 3, 5, 1}, 0.0);
    Tape<double> t;
    Value sv = t.constant(src);
    Value dv = t.input(d);
    Value out = ops::warp(t, sv, dv, WarpDirection::left_to_right);
    Value loss = ops::mean(t, out);
    t.backward(loss);
    const Tensord& g = t.grad(dv);
    for (std::int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("integer-valued disparity uses the right-sided subgradient") {
    // f=0 at an integer sample position; the analytic derivative picks the
    // right neighbor difference
    Tensord src(1, 1, 4, 1);
    src[0] = 1.0;
    src[1] = 5.0;
    src[2] = 2.0;
    src[3] = 7.0;
    Tensord d = Tensord::full({1, 1, 4, 1}, 1.0);
    Tape<double> t;
    Value dv = t.input(d);
    Value out = ops::warp(t, t.constant(src), dv, WarpDirection::left_to_right);
    Value loss = ops::mean(t, out);
    t.backward(loss);
    // out(0) samples exactly at x=1: d/dd = (src[2]-src[1]) / 4
    CHECK(t.grad(dv)[0] == doctest::Approx((src[2] - src[1]) / 4.0));
}

TEST_CASE("shape mismatches are rejected") {
    Tensorf img(1, 4, 4, 3);
    Tensorf wrong(1, 4, 5, 1);
    CHECK_THROWS_AS(warp(img, wrong, WarpDirection::left_to_right), Error);
    Tensorf multi(1, 4, 4, 2);
    CHECK_THROWS_AS(warp(img, multi, WarpDirection::left_to_right), Error);
}
