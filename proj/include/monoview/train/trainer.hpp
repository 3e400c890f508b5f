#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

#include "monoview/data/datapipe.hpp"
#include "monoview/losses.hpp"
#include "monoview/train/adam.hpp"
#include "monoview/train/checkpoint.hpp"

namespace monoview::train {

struct TrainConfig {
    Phase phase = Phase::I;
    /// Train every component with the phase-III objective from scratch
    /// (schedule-ablation mode); nothing is frozen and no prior phase is
    /// required.
    bool end_to_end = false;

    float lr = 1e-4f;
    float beta1 = 0.9f, beta2 = 0.999f;
    float adam_eps = 1e-8f;
    int batch_size = 16;
    int lr_patience = 10;   // epochs without improvement before halving
    int stop_patience = 20; // epochs without improvement before stopping
    int max_epochs = 0;     // 0 = until early stop
    std::int64_t max_steps = 0;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    float gamma = 0.07f; // confidence decay rate
    /// Deterministic mode: ordered single-threaded batch production. The
    /// threaded producer yields bit-identical batches, so this only controls
    /// scheduling.
    bool deterministic = true;
    double improve_eps = 1e-6; // strict decrease threshold
};

/// Plateau learning-rate / early-stop policy; a pure function of the
/// validation-metric history. "Improvement" is a strict decrease by more
/// than improve_eps. Halving resets only the halving counter.
struct LrPolicy {
    double lr;
    int lr_patience;
    int stop_patience;
    double improve_eps;

    double best = std::numeric_limits<double>::infinity();
    int since_improve = 0;
    int since_lr_event = 0;

    struct Update {
        double lr;
        bool improved;
        bool stop;
    };
    Update update(double metric);
};

/// Learning rate in effect for each epoch, given a metric history; epoch e
/// trains at the rate produced after observing metrics[0..e-1].
std::vector<double> simulate_lr_schedule(double initial_lr, int lr_patience,
                                         int stop_patience, double improve_eps,
                                         const std::vector<double>& metrics);

struct PhaseResult {
    Checkpoint checkpoint;
    std::vector<double> val_history;
    std::int64_t steps = 0;
    double first_step_loss = 0.0;
    double last_step_loss = 0.0;
};

/// Train one schedule phase. Phase II requires a prior checkpoint that
/// completed phase I; phase III (unless end_to_end) requires phase I or II.
/// Phases I/II train the encoder and both decoders; phase III freezes the
/// DBP and trains refiners + CBMs against confidence targets recomputed per
/// batch from the frozen disparities. Returns the best checkpoint; the model
/// is left holding the best parameters. When out_dir is non-empty the
/// checkpoint is saved under it. Per-epoch records go to `log` if given.
PhaseResult train_phase(nn::ModelGraph& model, const data::StereoDataset& data,
                        const TrainConfig& cfg, const Checkpoint* prior = nullptr,
                        const std::string& out_dir = "", std::ostream* log = nullptr);

/// Run stages in order, threading checkpoints. Stage checkpoints are saved
/// under out_dir/stage_<n>_<label>/ and the final one under out_dir/final/.
Checkpoint run_schedule(nn::ModelGraph& model, const data::StereoDataset& data,
                        const std::vector<TrainConfig>& stages,
                        const std::string& out_dir = "", std::ostream* log = nullptr,
                        const Checkpoint* prior = nullptr);

/// Configure which components train in a given phase (phase III freezes the
/// DBP; end-to-end trains everything).
void set_phase_trainables(nn::ModelGraph& model, Phase phase, bool end_to_end);

/// One forward + loss evaluation (no update) for a batch; used for
/// validation and exposed for tests.
LossResult<float> phase_loss(Tape<float>& tape, nn::ModelGraph& model,
                                  const Tensorf& left, const Tensorf& right,
                                  const TrainConfig& cfg);

} // namespace monoview::train
