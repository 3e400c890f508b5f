#include "monoview/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>

namespace monoview::train {

namespace fs = std::filesystem;

LrPolicy::Update LrPolicy::update(double metric) {
    const bool improved = metric < best - improve_eps;
    if (improved) {
        best = metric;
        since_improve = 0;
        since_lr_event = 0;
    } else {
        ++since_improve;
        ++since_lr_event;
    }
    if (since_lr_event >= lr_patience) {
        lr /= 2.0;
        since_lr_event = 0;
    }
    return {lr, improved, since_improve >= stop_patience};
}

std::vector<double> simulate_lr_schedule(double initial_lr, int lr_patience,
                                         int stop_patience, double improve_eps,
                                         const std::vector<double>& metrics) {
    LrPolicy policy{initial_lr, lr_patience, stop_patience, improve_eps};
    std::vector<double> used;
    double current = initial_lr;
    for (double m : metrics) {
        used.push_back(current);
        LrPolicy::Update u = policy.update(m);
        current = u.lr;
        if (u.stop) break;
    }
    return used;
}

void set_phase_trainables(nn::ModelGraph& model, Phase phase, bool end_to_end) {
    if (end_to_end) {
        nn::unfreeze(model, {"dbp", "refiner_l", "refiner_r", "cbm_l", "cbm_r"});
        return;
    }
    switch (phase) {
        case Phase::I:
        case Phase::II:
            nn::unfreeze(model, {"dbp"});
            nn::freeze(model, {"refiner_l", "refiner_r", "cbm_l", "cbm_r"});
            break;
        case Phase::III:
            nn::freeze(model, {"dbp"});
            nn::unfreeze(model, {"refiner_l", "refiner_r", "cbm_l", "cbm_r"});
            break;
    }
}

LossResult<float> phase_loss(Tape<float>& tape, nn::ModelGraph& model,
                                  const Tensorf& left, const Tensorf& right,
                                  const TrainConfig& cfg) {
    Value L = tape.constant(left);
    Value R = tape.constant(right);
    const bool with_ref = cfg.phase == Phase::III;
    nn::BranchForward lr = nn::forward_branch(tape, model, L,
                                              WarpDirection::left_to_right, with_ref);
    nn::BranchForward rl = nn::forward_branch(tape, model, R,
                                              WarpDirection::right_to_left, with_ref);
    switch (cfg.phase) {
        case Phase::I:
            return ops::loss_phase1(tape, L, R, rl.dbp, lr.dbp, cfg.loss_weights);
        case Phase::II:
            return ops::loss_phase2(tape, L, R, rl.dbp, lr.dbp, lr.disparity,
                                    rl.disparity, cfg.loss_weights);
        case Phase::III: {
            // confidence targets from the current disparities, detached
            auto [c_lr, c_rl] = confidence_maps(tape.value(lr.disparity),
                                                tape.value(rl.disparity), cfg.gamma);
            return ops::loss_phase3(tape, L, R, rl.dbp, lr.dbp, rl.ref, lr.ref,
                                    rl.v, lr.v, tape.constant(std::move(c_lr)),
                                    tape.constant(std::move(c_rl)), cfg.loss_weights);
        }
    }
    fail("unreachable phase");
}

namespace {

struct Snapshot {
    Checkpoint ckpt;
    bool set = false;
};

std::string stage_label(const TrainConfig& cfg) {
    return to_string(cfg.phase) + (cfg.end_to_end ? "e2e" : "");
}

void write_log_line(std::ostream* log, const TrainConfig& cfg, int epoch, double lr,
                    double train_loss,
                    const std::vector<std::pair<std::string, float>>& terms,
                    double val_metric, bool improved, std::int64_t steps) {
    if (!log) return;
    (*log) << "phase=" << stage_label(cfg) << " epoch=" << epoch << " lr=" << lr
           << " train_loss=" << train_loss;
    for (const auto& [name, value] : terms) (*log) << " " << name << "=" << value;
    (*log) << " val=" << val_metric << " improved=" << (improved ? 1 : 0)
           << " steps=" << steps << "\n";
    log->flush();
}

/// Validation metric: mean phase loss over the validation split,
/// center-cropped to patch size, no augmentation. Falls back to the training
/// epoch loss when the validation split is empty.
double validation_metric(nn::ModelGraph& model, const data::StereoDataset& data,
                         const TrainConfig& cfg, double train_epoch_loss) {
    const std::vector<int>& val = data.val_indices();
    if (val.empty()) return train_epoch_loss;
    const int ph = data.spec().patch_h, pw = data.spec().patch_w;
    double total = 0.0;
    std::int64_t count = 0;
    auto plan = data::batches(static_cast<int>(val.size()), cfg.batch_size,
                              nullptr, /*drop_last=*/false);
    for (const auto& batch : plan) {
        std::vector<data::StereoSample> samples;
        samples.reserve(batch.size());
        for (int i : batch) {
            data::StereoSample s = data.load_pair(val[static_cast<std::size_t>(i)]);
            if (s.left.h() != ph || s.left.w() != pw) {
                // deterministic center crop
                const int oy = (s.left.h() - ph) / 2, ox = (s.left.w() - pw) / 2;
                require(oy >= 0 && ox >= 0, "validation image smaller than patch");
                data::StereoSample c;
                c.source_id = s.source_id;
                for (auto [src, dst] : {std::pair{&s.left, &c.left},
                                        std::pair{&s.right, &c.right}}) {
                    *dst = Tensorf(1, ph, pw, 3);
                    for (int y = 0; y < ph; ++y)
                        std::copy_n(src->data() + src->idx(0, oy + y, ox, 0),
                                    static_cast<std::size_t>(pw) * 3,
                                    dst->data() + dst->idx(0, y, 0, 0));
                }
                s = std::move(c);
            }
            samples.push_back(std::move(s));
        }
        auto [left, right] = data::stack_views(samples);
        Tape<float> tape;
        LossResult<float> loss = phase_loss(tape, model, left, right, cfg);
        total += static_cast<double>(tape.value(loss.total)[0]) *
                 static_cast<double>(batch.size());
        count += static_cast<std::int64_t>(batch.size());
    }
    return total / static_cast<double>(count);
}

} // namespace

PhaseResult train_phase(nn::ModelGraph& model, const data::StereoDataset& data,
                        const TrainConfig& cfg, const Checkpoint* prior,
                        const std::string& out_dir, std::ostream* log) {
    require(cfg.lr > 0.0f, "learning rate must be positive");
    require(cfg.lr_patience >= 1 && cfg.stop_patience >= 1, "patiences must be >= 1");
    require(cfg.batch_size >= 1, "batch size must be >= 1");
    if (!cfg.end_to_end) {
        if (cfg.phase == Phase::II)
            require(prior && prior->has_completed(1),
                    "phase II requires a checkpoint that completed phase I");
        if (cfg.phase == Phase::III)
            require(prior && (prior->has_completed(1) || prior->has_completed(2)),
                    "phase III requires a checkpoint that completed phase I or II");
    }

    set_phase_trainables(model, cfg.phase, cfg.end_to_end);
    AdamOptimizer adam(cfg.beta1, cfg.beta2, cfg.adam_eps); // fresh per phase
    LrPolicy policy{static_cast<double>(cfg.lr), cfg.lr_patience, cfg.stop_patience,
                    cfg.improve_eps};

    const int phase_tag = static_cast<int>(cfg.phase) * 10 + (cfg.end_to_end ? 1 : 0);
    Rng master(Rng::mix(cfg.seed, 0x7068 + static_cast<std::uint64_t>(phase_tag)));

    const std::vector<int>& train_idx = data.train_indices();
    require(!train_idx.empty(), "training split is empty");
    const int ph = data.spec().patch_h, pw = data.spec().patch_w;

    PhaseResult result;
    Snapshot best;
    double lr_in_effect = cfg.lr;
    bool stop = false;

    for (int epoch = 1; !stop; ++epoch) {
        const std::uint64_t shuffle_seed = master.raw();
        const std::uint64_t data_seed = master.raw();
        Rng shuffle_rng(shuffle_seed);
        auto plan = data::batches(static_cast<int>(train_idx.size()), cfg.batch_size,
                                  &shuffle_rng, /*drop_last=*/true);
        require(!plan.empty(),
                "batch size " + std::to_string(cfg.batch_size) +
                    " exceeds the training split (" +
                    std::to_string(train_idx.size()) + " samples)");
        for (auto& batch : plan)
            for (int& i : batch) i = train_idx[static_cast<std::size_t>(i)];

        data::BatchProducer producer(data, std::move(plan), ph, pw,
                                     data.spec().augment_fraction, data_seed,
                                     /*threaded=*/!cfg.deterministic);

        double epoch_loss = 0.0;
        std::vector<std::pair<std::string, float>> epoch_terms;
        std::int64_t epoch_steps = 0;
        std::vector<data::StereoSample> samples;
        while (producer.next(samples)) {
            auto [left, right] = data::stack_views(samples);
            for (nn::NetworkComponent* c : model.components()) c->params().zero_grads();
            Tape<float> tape;
            LossResult<float> loss = phase_loss(tape, model, left, right, cfg);
            const float loss_value = tape.value(loss.total)[0];
            require(std::isfinite(loss_value),
                    "non-finite loss in phase " + stage_label(cfg) + ", epoch " +
                        std::to_string(epoch) + ", step " +
                        std::to_string(result.steps + 1));
            tape.backward(loss.total);
            adam.step(model.components(), static_cast<float>(lr_in_effect));

            ++result.steps;
            ++epoch_steps;
            epoch_loss += loss_value;
            if (epoch_terms.empty()) epoch_terms = loss.terms;
            else
                for (std::size_t i = 0; i < epoch_terms.size(); ++i)
                    epoch_terms[i].second += loss.terms[i].second;
            if (result.steps == 1) result.first_step_loss = loss_value;
            result.last_step_loss = loss_value;
            if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) break;
        }
        require(epoch_steps > 0, "epoch produced no steps");
        epoch_loss /= static_cast<double>(epoch_steps);
        for (auto& [name, value] : epoch_terms)
            value /= static_cast<float>(epoch_steps);

        const double metric = validation_metric(model, data, cfg, epoch_loss);
        LrPolicy::Update update = policy.update(metric);
        result.val_history.push_back(metric);
        write_log_line(log, cfg, epoch, lr_in_effect, epoch_loss, epoch_terms, metric,
                       update.improved, epoch_steps);
        lr_in_effect = update.lr;

        if (update.improved || !best.set) {
            best.ckpt = Checkpoint::capture_model(model);
            for (auto [name, tensor] : adam.state_tensors())
                best.ckpt.optim.emplace_back(name, *tensor);
            best.ckpt.adam_step = adam.step_count();
            best.ckpt.phase = static_cast<int>(cfg.phase);
            best.ckpt.end_to_end = cfg.end_to_end;
            best.ckpt.epoch = epoch;
            best.ckpt.best_metric = metric;
            best.ckpt.rng_state = master.state();
            best.ckpt.seed = cfg.seed;
            if (prior) best.ckpt.completed_phases = prior->completed_phases;
            if (!best.ckpt.has_completed(static_cast<int>(cfg.phase)))
                best.ckpt.completed_phases.push_back(static_cast<int>(cfg.phase));
            best.set = true;
        }

        stop = update.stop || (cfg.max_epochs > 0 && epoch >= cfg.max_epochs) ||
               (cfg.max_steps > 0 && result.steps >= cfg.max_steps);
    }

    best.ckpt.apply_model(model); // leave the model at its best parameters
    result.checkpoint = std::move(best.ckpt);
    if (!out_dir.empty()) result.checkpoint.save(out_dir);
    return result;
}

Checkpoint run_schedule(nn::ModelGraph& model, const data::StereoDataset& data,
                        const std::vector<TrainConfig>& stages,
                        const std::string& out_dir, std::ostream* log,
                        const Checkpoint* prior) {
    require(!stages.empty(), "schedule has no stages");
    Checkpoint current;
    bool have_prior = prior != nullptr;
    if (prior) current = *prior;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const TrainConfig& cfg = stages[i];
        std::string stage_dir;
        if (!out_dir.empty())
            stage_dir = (fs::path(out_dir) /
                         ("stage_" + std::to_string(i + 1) + "_" + stage_label(cfg)))
                            .string();
        PhaseResult res = train_phase(model, data, cfg,
                                      have_prior ? &current : nullptr, stage_dir, log);
        current = std::move(res.checkpoint);
        have_prior = true;
    }
    if (!out_dir.empty()) current.save((fs::path(out_dir) / "final").string());
    return current;
}

} // namespace monoview::train
