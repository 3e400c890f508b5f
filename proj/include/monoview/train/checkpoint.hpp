#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "monoview/nn/model.hpp"

namespace monoview::train {

enum class Phase { I = 1, II = 2, III = 3 };

std::string to_string(Phase p);
Phase phase_from_int(int p);

/// Complete training snapshot: model parameters, optimizer state, schedule
/// position, best validation metric and the per-phase RNG state. Binary
/// round-trips are bit-exact.
struct Checkpoint {
    std::vector<std::pair<std::string, Tensorf>> model; // "component/param"
    std::vector<std::pair<std::string, Tensorf>> optim; // "component/param.m|.v"
    std::int64_t adam_step = 0;
    int phase = 0; // stage that produced this checkpoint; 0 = untrained
    bool end_to_end = false;
    int epoch = 0;
    double best_metric = 0.0;
    std::string rng_state;
    std::vector<int> completed_phases; // ascending, e.g. {1,2}
    std::uint64_t seed = 0;

    bool has_completed(int phase_number) const;

    /// Snapshot the graph's parameters (optimizer state not included).
    static Checkpoint capture_model(const nn::ModelGraph& graph);

    /// Write the captured parameters back; every tensor must match an
    /// existing parameter in name and shape.
    void apply_model(nn::ModelGraph& graph) const;

    void save(const std::string& dir) const;
    static Checkpoint load(const std::string& dir);
};

} // namespace monoview::train
