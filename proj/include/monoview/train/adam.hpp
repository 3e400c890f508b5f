#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "monoview/nn/component.hpp"

namespace monoview::train {

/// Adam over the trainable entries of a set of parameter stores. Moment
/// slots are created lazily for trainable entries only, so frozen parameters
/// carry no optimizer state (and pick up none until they are unfrozen and
/// actually stepped).
class AdamOptimizer {
public:
    AdamOptimizer(float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// One update from the accumulated gradients; gradients are zeroed after.
    void step(const std::vector<nn::NetworkComponent*>& components, float lr);

    bool has_state(const std::string& qualified_name) const {
        return slots_.count(qualified_name) != 0;
    }
    std::int64_t step_count() const { return t_; }

    /// State tensors as "<qualified>.m" / "<qualified>.v", manifest order.
    std::vector<std::pair<std::string, const Tensorf*>> state_tensors() const;
    void load_state(const std::map<std::string, Tensorf>& tensors,
                    std::int64_t step_count);

private:
    struct Slot {
        Tensorf m, v;
    };
    std::map<std::string, Slot> slots_;
    float beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

} // namespace monoview::train
