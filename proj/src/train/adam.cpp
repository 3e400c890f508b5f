#include "monoview/train/adam.hpp"

#include <cmath>

namespace monoview::train {

void AdamOptimizer::step(const std::vector<nn::NetworkComponent*>& components,
                         float lr) {
    ++t_;
    const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
    for (nn::NetworkComponent* comp : components) {
        for (nn::ParamEntry& e : comp->params().entries()) {
            if (!e.trainable) continue;
            const std::string key = comp->name() + "/" + e.name;
            Slot& slot = slots_[key];
            if (slot.m.empty()) {
                slot.m = Tensorf(e.value.shape());
                slot.v = Tensorf(e.value.shape());
            }
            float* p = e.value.data();
            float* g = e.grad.data();
            float* m = slot.m.data();
            float* v = slot.v.data();
            for (std::int64_t i = 0; i < e.value.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0f - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1.0f - beta2_) * g[i] * g[i];
                const float mhat = m[i] / bc1;
                const float vhat = v[i] / bc2;
                p[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
                g[i] = 0.0f;
            }
        }
    }
}

std::vector<std::pair<std::string, const Tensorf*>> AdamOptimizer::state_tensors() const {
    std::vector<std::pair<std::string, const Tensorf*>> out;
    out.reserve(slots_.size() * 2);
    for (const auto& [name, slot] : slots_) {
        out.emplace_back(name + ".m", &slot.m);
        out.emplace_back(name + ".v", &slot.v);
    }
    return out;
}

void AdamOptimizer::load_state(const std::map<std::string, Tensorf>& tensors,
                               std::int64_t step_count) {
    slots_.clear();
    t_ = step_count;
    for (const auto& [name, tensor] : tensors) {
        require(name.size() > 2, "bad optimizer state tensor name '" + name + "'");
        const std::string suffix = name.substr(name.size() - 2);
        const std::string base = name.substr(0, name.size() - 2);
        require(suffix == ".m" || suffix == ".v",
                "optimizer state tensor '" + name + "' has no .m/.v suffix");
        Slot& slot = slots_[base];
        (suffix == ".m" ? slot.m : slot.v) = tensor;
    }
    for (const auto& [name, slot] : slots_)
        require(!slot.m.empty() && !slot.v.empty() &&
                    slot.m.shape() == slot.v.shape(),
                "optimizer state for '" + name + "' is incomplete");
}

} // namespace monoview::train
