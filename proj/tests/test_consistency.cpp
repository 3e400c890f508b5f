#include <doctest.h>

#include <cmath>

#include "monoview/consistency.hpp"
#include "monoview/gradcheck.hpp"
#include "test_util.hpp"

using namespace monoview;

namespace {

/// Per-pixel scalar-loop oracle for the confidence maps, independent of the
/// tape implementation. Cross-map lookups use inline bilinear sampling with
/// border clamp.
double sample_clamped(const Tensord& map, int y, double u) {
    const int W = map.w();
    if (u < 0.0) u = 0.0;
    if (u > W - 1) u = W - 1;
    const int x0 = static_cast<int>(std::floor(u));
    const int x1 = std::min(x0 + 1, W - 1);
    const double f = u - x0;
    return (1.0 - f) * map.at(0, y, x0, 0) + f * map.at(0, y, x1, 0);
}

std::pair<Tensord, Tensord> confidence_oracle(const Tensord& d_lr, const Tensord& d_rl,
                                              double gamma) {
    Tensord c_lr(d_lr.shape()), c_rl(d_rl.shape());
    for (int y = 0; y < d_lr.h(); ++y)
        for (int x = 0; x < d_lr.w(); ++x) {
            const double lr = d_lr.at(0, y, x, 0);
            const double rl = d_rl.at(0, y, x, 0);
            c_lr.at(0, y, x, 0) =
                std::exp(-gamma * std::abs(lr - sample_clamped(d_rl, y, x + lr)));
            c_rl.at(0, y, x, 0) =
                std::exp(-gamma * std::abs(rl - sample_clamped(d_lr, y, x - rl)));
        }
    return {c_lr, c_rl};
}

Tensord flip_x(const Tensord& t) {
    Tensord out(t.shape());
    for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x)
            out.at(0, y, x, 0) = t.at(0, y, t.w() - 1 - x, 0);
    return out;
}

} // namespace

TEST_CASE("consistent constant disparities give confidence exactly 1") {
    for (double delta : {0.0, 1.0, 2.5, 7.0}) {
        Tensord d_lr = Tensord::full({1, 6, 8, 1}, delta);
        Tensord d_rl = Tensord::full({1, 6, 8, 1}, delta);
        auto [c_lr, c_rl] = confidence_maps(d_lr, d_rl, 0.07);
        for (std::int64_t i = 0; i < c_lr.size(); ++i) {
            CHECK(c_lr[i] == 1.0);
            CHECK(c_rl[i] == 1.0);
        }
    }
}

TEST_CASE("confidence at a known inconsistency: exp(-0.7)") {
    // |inconsistency| = 10 at every pixel, gamma = 0.07
    Tensord d_lr = Tensord::full({1, 4, 4, 1}, 10.0);
    Tensord d_rl = Tensord::full({1, 4, 4, 1}, 0.0);
    // C_RL: |d_RL - d_LR(x - 0)| = |0 - 10| = 10 everywhere
    auto [c_lr, c_rl] = confidence_maps(d_lr, d_rl, 0.07);
    const double expected = std::exp(-0.7); // ~0.496585
    for (std::int64_t i = 0; i < c_rl.size(); ++i)
        CHECK(c_rl[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.4966).epsilon(1e-3));
}

TEST_CASE("confidence maps equal the scalar-loop oracle on random instances") {
    for (int trial = 0; trial < 50; ++trial) {
        Tensord d_lr = testutil::random_tensor<double>({1, 8, 8, 1}, 500 + trial, 0.0, 3.0);
        Tensord d_rl =
            testutil::random_tensor<double>({1, 8, 8, 1}, 900 + trial, 0.0, 3.0);
        auto [c_lr, c_rl] = confidence_maps(d_lr, d_rl, 0.07);
        auto [o_lr, o_rl] = confidence_oracle(d_lr, d_rl, 0.07);
        CHECK(testutil::max_abs_diff(c_lr, o_lr) < 1e-6);
        CHECK(testutil::max_abs_diff(c_rl, o_rl) < 1e-6);
    }
}

TEST_CASE("confidence values stay in (0,1]") {
    Tensord d_lr = testutil::random_tensor<double>({1, 8, 8, 1}, 5, 0.0, 20.0);
    Tensord d_rl = testutil::random_tensor<double>({1, 8, 8, 1}, 6, 0.0, 20.0);
    auto [c_lr, c_rl] = confidence_maps(d_lr, d_rl, 0.07);
    for (std::int64_t i = 0; i < c_lr.size(); ++i) {
        CHECK(c_lr[i] > 0.0);
        CHECK(c_lr[i] <= 1.0);
        CHECK(c_rl[i] > 0.0);
        CHECK(c_rl[i] <= 1.0);
    }
}

TEST_CASE("x-flip swaps the two confidence maps") {
    // C_LR(d1,d2) flipped equals C_RL(flip d2, flip d1): the +d lookup turns
    // into the -d lookup under mirroring
    Tensord d1 = testutil::random_tensor<double>({1, 4, 8, 1}, 71, 0.0, 2.0);
    Tensord d2 = testutil::random_tensor<double>({1, 4, 8, 1}, 72, 0.0, 2.0);
    auto [c_lr, c_rl] = confidence_maps(d1, d2, 0.07);
    auto [f_lr, f_rl] = confidence_maps(flip_x(d2), flip_x(d1), 0.07);
    CHECK(testutil::max_abs_diff(flip_x(c_lr), f_rl) < 1e-12);
    CHECK(testutil::max_abs_diff(flip_x(c_rl), f_lr) < 1e-12);
}

TEST_CASE("confidence gradients match finite differences") {
    Tensord d_lr = testutil::random_tensor<double>({1, 6, 6, 1}, 81, 0.2, 0.7);
    Tensord d_rl = testutil::random_tensor<double>({1, 6, 6, 1}, 82, 0.2, 0.7);
    auto build = [](Tape<double>& t, const std::vector<Value>& in) {
        auto [c_lr, c_rl] = ops::confidence_maps(t, in[0], in[1], 0.07);
        return ops::mean(t, ops::add(t, c_lr, c_rl));
    };
    GradCheckReport rep = finite_difference_check({d_lr, d_rl}, build, 1e-5, 1e-4);
    CHECK_MESSAGE(rep.passed, rep.worst);
}

TEST_CASE("blend endpoints are bit-exact and interior values interpolate") {
    Tensorf dbp = testutil::random_tensor<float>({1, 5, 4, 3}, 91, -1.0f, 1.0f);
    Tensorf ref = testutil::random_tensor<float>({1, 5, 4, 3}, 92, -1.0f, 1.0f);

    Tensorf v0(1, 5, 4, 1);
    Tensorf out0 = blend(dbp, ref, v0);
    CHECK(out0 == dbp);

    Tensorf v1 = Tensorf::full({1, 5, 4, 1}, 1.0f);
    Tensorf out1 = blend(dbp, ref, v1);
    CHECK(out1 == ref);

    // v = 0.25, dbp = 0, ref = 1 -> 0.25 everywhere
    Tensorf zeros(1, 5, 4, 3);
    Tensorf ones = Tensorf::full({1, 5, 4, 3}, 1.0f);
    Tensorf q = Tensorf::full({1, 5, 4, 1}, 0.25f);
    Tensorf mix = blend(zeros, ones, q);
    for (std::int64_t i = 0; i < mix.size(); ++i) CHECK(mix[i] == 0.25f);

    // pixelwise between the two inputs
    Tensorf vr = testutil::random_tensor<float>({1, 5, 4, 1}, 93, 0.0f, 1.0f);
    Tensorf mixed = blend(dbp, ref, vr);
    for (std::int64_t i = 0; i < mixed.size(); ++i) {
        const float lo = std::min(dbp[i], ref[i]) - 1e-6f;
        const float hi = std::max(dbp[i], ref[i]) + 1e-6f;
        CHECK(mixed[i] >= lo);
        CHECK(mixed[i] <= hi);
    }
}

TEST_CASE("blend rejects v outside [0,1]") {
    Tensorf dbp(1, 2, 2, 3), ref(1, 2, 2, 3);
    Tensorf bad = Tensorf::full({1, 2, 2, 1}, 1.5f);
    CHECK_THROWS_AS(blend(dbp, ref, bad), Error);
}

TEST_CASE("occlusion mask thresholds confidence and is monotone") {
    Tensorf c = Tensorf::full({1, 4, 4, 1}, 1.0f);
    Tensorf empty = occlusion_mask(c, 0.9f);
    for (std::int64_t i = 0; i < empty.size(); ++i) CHECK(empty[i] == 0.0f);

    c.at(0, 1, 2, 0) = static_cast<float>(std::exp(-0.7)); // ~0.4966
    Tensorf one = occlusion_mask(c, 0.5f);
    int count = 0;
    for (std::int64_t i = 0; i < one.size(); ++i) count += one[i] > 0;
    CHECK(count == 1);
    CHECK(one.at(0, 1, 2, 0) == 1.0f);

    // mask growth is monotone in the threshold
    Tensorf noise = testutil::random_tensor<float>({1, 8, 8, 1}, 94, 0.0f, 1.0f);
    int prev = 0;
    for (float threshold : {0.1f, 0.3f, 0.5f, 0.7f, 0.9f}) {
        Tensorf m = occlusion_mask(noise, threshold);
        int n = 0;
        for (std::int64_t i = 0; i < m.size(); ++i) n += m[i] > 0;
        CHECK(n >= prev);
        prev = n;
    }
}
