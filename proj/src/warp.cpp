#include "monoview/warp.hpp"

#include "monoview/gradcheck.hpp"

namespace monoview {

GradCheckReport warp_gradient_check(double step, double tolerance,
                                    std::uint64_t seed) {
    Rng rng(seed);
    const int h = 6, w = 8, c = 2;
    Tensord src(1, h, w, c);
    for (std::int64_t i = 0; i < src.size(); ++i) src[i] = rng.uniform(-1.0, 1.0);
    Tensord disp(1, h, w, 1);
    for (std::int64_t i = 0; i < disp.size(); ++i) disp[i] = rng.uniform(0.2, 0.7);
    // random projection weights make the scalar objective exercise every pixel
    Tensord proj(1, h, w, c);
    for (std::int64_t i = 0; i < proj.size(); ++i) proj[i] = rng.uniform(0.5, 1.5);

    GradCheckReport worst;
    worst.tolerance = tolerance;
    worst.passed = true;
    for (WarpDirection dir :
         {WarpDirection::left_to_right, WarpDirection::right_to_left}) {
        auto build = [dir, &proj](Tape<double>& t, const std::vector<Value>& in) {
            Value warped = ops::warp(t, in[0], in[1], dir);
            return ops::mean(t, ops::mul(t, warped, t.constant(proj)));
        };
        GradCheckReport rep =
            finite_difference_check({src, disp}, build, step, tolerance);
        if (rep.max_rel_error > worst.max_rel_error) {
            worst.max_rel_error = rep.max_rel_error;
            worst.worst = to_string(dir) + ", " + rep.worst;
        }
        worst.passed = worst.passed && rep.passed;
    }
    return worst;
}

} // namespace monoview
