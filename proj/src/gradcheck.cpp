#include "monoview/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace monoview {

namespace {

double eval(const std::vector<Tensord>& inputs, const GradCheckBuildFn& build) {
    Tape<double> t;
    std::vector<Value> vals;
    vals.reserve(inputs.size());
    for (const auto& in : inputs) vals.push_back(t.constant(in));
    return t.value(build(t, vals))[0];
}

} // namespace

GradCheckReport finite_difference_check(const std::vector<Tensord>& inputs,
                                        const GradCheckBuildFn& build,
                                        double step, double tolerance) {
    require(step > 0 && tolerance > 0, "finite_difference_check: bad step/tolerance");

    // analytic gradients, one backward pass
    std::vector<Tensord> analytic;
    {
        Tape<double> t;
        std::vector<Value> vals;
        vals.reserve(inputs.size());
        for (const auto& in : inputs) vals.push_back(t.input(in));
        Value root = build(t, vals);
        require(t.value(root).size() == 1, "finite_difference_check: build must return a scalar");
        t.backward(root);
        for (Value v : vals) {
            const Tensord& g = t.grad(v);
            analytic.push_back(g.empty() ? Tensord(t.value(v).shape()) : g);
        }
    }

    GradCheckReport rep;
    rep.tolerance = tolerance;
    std::vector<Tensord> work = inputs;
    for (std::size_t k = 0; k < work.size(); ++k) {
        for (std::int64_t i = 0; i < work[k].size(); ++i) {
            const double saved = work[k][i];
            work[k][i] = saved + step;
            const double fp = eval(work, build);
            work[k][i] = saved - step;
            const double fm = eval(work, build);
            work[k][i] = saved;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[k][i];
            const double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
            const double rel = std::abs(an - fd) / denom;
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst = "input " + std::to_string(k) + " flat index " +
                            std::to_string(i) + ": analytic " + std::to_string(an) +
                            " vs fd " + std::to_string(fd);
            }
        }
    }
    rep.passed = rep.max_rel_error < tolerance;
    return rep;
}

} // namespace monoview
