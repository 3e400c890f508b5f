#pragma once

#include <functional>
#include <vector>

#include "monoview/autodiff.hpp"
#include "monoview/warp.hpp"

namespace monoview {

/// Builds a scalar tape value from one differentiable leaf per input tensor.
using GradCheckBuildFn =
    std::function<Value(Tape<double>&, const std::vector<Value>&)>;

/// Compare analytic gradients of a scalar function against central finite
/// differences, element by element, in double precision. Relative error uses
/// a small absolute floor so matching near-zero gradients do not blow up.
GradCheckReport finite_difference_check(const std::vector<Tensord>& inputs,
                                        const GradCheckBuildFn& build,
                                        double step, double tolerance);

} // namespace monoview
