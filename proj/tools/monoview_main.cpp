#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "monoview/config.hpp"
#include "monoview/io/image_io.hpp"
#include "monoview/metrics/quality.hpp"
#include "monoview/synth/pipeline.hpp"
#include "monoview/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace monoview;

namespace {

nn::ModelGraph load_model(std::uint64_t seed, const std::string& checkpoint_dir,
                          const std::string& encoder_weights,
                          train::Checkpoint* out_ckpt = nullptr) {
    nn::ModelGraph model = nn::build_model(seed, encoder_weights);
    if (!checkpoint_dir.empty()) {
        train::Checkpoint ckpt = train::Checkpoint::load(checkpoint_dir);
        ckpt.apply_model(model);
        if (out_ckpt) *out_ckpt = std::move(ckpt);
    }
    return model;
}

WarpDirection parse_direction(const std::string& s) {
    if (s == "lr") return WarpDirection::left_to_right;
    if (s == "rl") return WarpDirection::right_to_left;
    fail("direction must be 'lr' or 'rl'");
}

std::vector<float> parse_alphas(const std::string& csv) {
    std::vector<float> alphas;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        alphas.push_back(std::stof(tok));
    }
    require(!alphas.empty(), "no alphas given");
    return alphas;
}

int cmd_train(const AppConfig& cfg, const std::string& phase_arg, bool end_to_end,
              const std::string& checkpoint_dir, const std::string& encoder_weights) {
    train::Checkpoint prior;
    bool have_prior = !checkpoint_dir.empty();
    nn::ModelGraph model =
        load_model(cfg.train.seed, checkpoint_dir, encoder_weights, &prior);

    std::vector<train::TrainConfig> stages;
    auto stage = [&cfg, end_to_end](train::Phase p) {
        train::TrainConfig s = cfg.train;
        s.phase = p;
        s.end_to_end = end_to_end && p == train::Phase::III;
        return s;
    };
    if (phase_arg == "all") {
        for (train::Phase p : {train::Phase::I, train::Phase::II, train::Phase::III}) {
            if (have_prior && prior.has_completed(static_cast<int>(p))) continue;
            stages.push_back(stage(p));
        }
        require(!stages.empty(), "checkpoint has already completed every phase");
    } else {
        stages.push_back(stage(train::phase_from_int(std::stoi(phase_arg))));
    }

    data::DatasetSpec spec = cfg.dataset;
    spec.seed = cfg.train.seed;
    data::StereoDataset dataset = data::StereoDataset::load(spec);
    std::printf("dataset: %d pairs (%zu train / %zu val) under %s\n", dataset.total(),
                dataset.train_indices().size(), dataset.val_indices().size(),
                spec.root.c_str());

    fs::create_directories(cfg.out_dir);
    std::ofstream log(fs::path(cfg.out_dir) / "train_log.txt", std::ios::app);
    require(log.good(), "cannot open training log in " + cfg.out_dir);
    train::Checkpoint final = train::run_schedule(model, dataset, stages, cfg.out_dir,
                                                  &log, have_prior ? &prior : nullptr);
    std::printf("done: best metric %.6f (phase %d epoch %d); checkpoint at %s/final\n",
                final.best_metric, final.phase, final.epoch, cfg.out_dir.c_str());
    return 0;
}

int cmd_synthesize(const std::string& input_path, const std::string& checkpoint_dir,
                   const std::string& direction, const std::set<std::string>& outputs,
                   const std::string& out_dir, std::uint64_t seed) {
    nn::ModelGraph model = load_model(seed, checkpoint_dir, "");
    const Tensorf input = data::normalize(io::read_png(input_path));
    PredictionBundle bundle = synth::synthesize(model, input, parse_direction(direction));

    fs::create_directories(out_dir);
    const std::string stem = fs::path(input_path).stem().string();
    auto out = [&](const std::string& suffix) {
        return (fs::path(out_dir) / (stem + "_" + suffix)).string();
    };
    if (outputs.count("view"))
        io::write_png(out("view.png"), data::denormalize(bundle.blended));
    if (outputs.count("dbp")) io::write_png(out("dbp.png"), data::denormalize(bundle.dbp));
    if (outputs.count("ref")) io::write_png(out("ref.png"), data::denormalize(bundle.ref));
    if (outputs.count("disparity")) io::write_pfm(out("disparity.pfm"), bundle.disparity);
    if (outputs.count("confidence")) io::write_pfm(out("confidence.pfm"), bundle.v);
    std::printf("synthesized %s (%dx%d) -> %s\n", stem.c_str(), input.w(), input.h(),
                out_dir.c_str());
    return 0;
}

int cmd_interpolate(const std::string& input_path, const std::string& checkpoint_dir,
                    const std::string& direction, const std::string& alphas_csv,
                    const std::string& out_dir, std::uint64_t seed) {
    nn::ModelGraph model = load_model(seed, checkpoint_dir, "");
    const Tensorf input = data::normalize(io::read_png(input_path));
    std::vector<float> alphas = parse_alphas(alphas_csv);
    auto frames =
        synth::interpolate(model, input, parse_direction(direction), alphas);

    fs::create_directories(out_dir);
    const std::string stem = fs::path(input_path).stem().string();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_interp_%03zu.png", stem.c_str(), i);
        io::write_png((fs::path(out_dir) / name).string(),
                      data::denormalize(frames[i].blended));
    }
    std::printf("wrote %zu interpolated frames to %s\n", frames.size(), out_dir.c_str());
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& mask_dir, const std::string& out_dir) {
    metrics::MetricReport report = metrics::evaluate_directory(pred_dir, gt_dir, mask_dir);
    std::cout << report.table();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream table(fs::path(out_dir) / "report.txt");
        table << report.table();
        std::ofstream records(fs::path(out_dir) / "report_records.txt");
        records << report.records();
        require(table.good() && records.good(), "cannot write report files to " + out_dir);
    }
    return 0;
}

int cmd_inspect(const std::string& checkpoint_dir, std::uint64_t seed) {
    nn::ModelGraph model = load_model(seed, checkpoint_dir, "");
    for (const nn::NetworkComponent* c : model.components()) {
        std::printf("%s (%lld parameters, input %d ch)\n", c->name().c_str(),
                    static_cast<long long>(c->parameter_count()), c->input_channels());
        for (const nn::LayerSpec& s : c->layers())
            std::printf("  %s\n", s.serialize().c_str());
    }
    std::printf("total parameters:  %lld\n",
                static_cast<long long>(model.parameter_count()));
    std::printf("dbp subgraph:      %lld\n",
                static_cast<long long>(model.dbp_parameter_count()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"monoview: lightweight monocular stereo view synthesis"};
    app.require_subcommand(1);

    std::string config_path, data_root, out_dir, checkpoint_dir, encoder_weights;
    std::string input_path, direction = "lr", alphas = "0,0.5,1";
    std::string pred_dir, gt_dir, mask_dir, phase = "all";
    std::string outputs_csv = "view";
    std::uint64_t seed = 0;
    bool deterministic = false, end_to_end = false;
    // train overrides (applied over config-file values only when given)
    double lr = 0.0;
    int batch_size = 0, max_epochs = 0, val_count = -1, patch = 0;
    std::int64_t max_steps = 0;

    if (const char* env_root = std::getenv("MONOVIEW_DATA_ROOT")) data_root = env_root;

    CLI::App* train_cmd = app.add_subcommand("train", "run the training schedule");
    train_cmd->add_option("--config", config_path, "config file (key = value)");
    train_cmd->add_option("--data", data_root, "dataset root (default: $MONOVIEW_DATA_ROOT)");
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint to resume from");
    train_cmd->add_option("--encoder-weights", encoder_weights,
                          "external encoder weight directory");
    train_cmd->add_option("--phase", phase, "1|2|3|all")
        ->check(CLI::IsMember({"1", "2", "3", "all"}));
    train_cmd->add_flag("--end-to-end", end_to_end,
                        "train phase III end to end (schedule ablation)");
    train_cmd->add_option("--seed", seed, "rng seed");
    train_cmd->add_flag("--deterministic", deterministic,
                        "single-threaded, bit-reproducible run");
    train_cmd->add_option("--lr", lr, "learning rate");
    train_cmd->add_option("--batch-size", batch_size, "batch size");
    train_cmd->add_option("--max-epochs", max_epochs, "epoch cap (0 = early stop)");
    train_cmd->add_option("--max-steps", max_steps, "step cap (0 = unlimited)");
    train_cmd->add_option("--patch", patch, "square patch size (divisible by 64)");
    train_cmd->add_option("--val-count", val_count, "validation pairs held out");

    CLI::App* synth_cmd = app.add_subcommand("synthesize", "synthesize a view from one image");
    synth_cmd->add_option("--input", input_path, "input PNG")->required();
    synth_cmd->add_option("--checkpoint", checkpoint_dir, "trained checkpoint")->required();
    synth_cmd->add_option("--direction", direction, "lr|rl")
        ->check(CLI::IsMember({"lr", "rl"}));
    synth_cmd->add_option("--outputs", outputs_csv,
                          "comma list of view,disparity,confidence,dbp,ref");
    synth_cmd->add_option("--out", out_dir, "output directory")->required();
    synth_cmd->add_option("--seed", seed, "rng seed (untrained components)");

    CLI::App* interp_cmd = app.add_subcommand("interpolate", "interpolate views");
    interp_cmd->add_option("--input", input_path, "input PNG")->required();
    interp_cmd->add_option("--checkpoint", checkpoint_dir, "trained checkpoint")->required();
    interp_cmd->add_option("--direction", direction, "lr|rl")
        ->check(CLI::IsMember({"lr", "rl"}));
    interp_cmd->add_option("--alphas", alphas, "ascending CSV of factors in [0,1]");
    interp_cmd->add_option("--out", out_dir, "output directory")->required();
    interp_cmd->add_option("--seed", seed, "rng seed (untrained components)");

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM over a directory");
    eval_cmd->add_option("--pred", pred_dir, "prediction PNGs")->required();
    eval_cmd->add_option("--gt", gt_dir, "ground-truth PNGs")->required();
    eval_cmd->add_option("--masks", mask_dir, "disocclusion masks (nonzero = evaluated)");
    eval_cmd->add_option("--out", out_dir, "directory for report files");

    CLI::App* inspect_cmd = app.add_subcommand("inspect", "print architecture and counts");
    inspect_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint to inspect");
    inspect_cmd->add_option("--seed", seed, "rng seed when building fresh");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help/usage
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd) {
            AppConfig cfg;
            if (!config_path.empty()) load_config_file(cfg, config_path);
            // flags override config-file values
            if (train_cmd->count("--data") || cfg.dataset.root.empty())
                cfg.dataset.root = data_root;
            if (train_cmd->count("--out")) cfg.out_dir = out_dir;
            if (train_cmd->count("--seed")) cfg.train.seed = seed;
            if (train_cmd->count("--deterministic")) cfg.train.deterministic = true;
            if (train_cmd->count("--lr")) cfg.train.lr = static_cast<float>(lr);
            if (train_cmd->count("--batch-size")) cfg.train.batch_size = batch_size;
            if (train_cmd->count("--max-epochs")) cfg.train.max_epochs = max_epochs;
            if (train_cmd->count("--max-steps")) cfg.train.max_steps = max_steps;
            if (train_cmd->count("--patch")) {
                cfg.dataset.patch_h = patch;
                cfg.dataset.patch_w = patch;
            }
            if (train_cmd->count("--val-count")) cfg.dataset.val_count = val_count;
            require(!cfg.dataset.root.empty(),
                    "no dataset root: pass --data or set MONOVIEW_DATA_ROOT");
            return cmd_train(cfg, phase, end_to_end, checkpoint_dir, encoder_weights);
        }
        if (*synth_cmd) {
            std::set<std::string> outputs;
            std::istringstream ss(outputs_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                static const std::set<std::string> known = {"view", "disparity",
                                                            "confidence", "dbp", "ref"};
                require(known.count(tok), "unknown output '" + tok + "'");
                outputs.insert(tok);
            }
            return cmd_synthesize(input_path, checkpoint_dir, direction, outputs,
                                  out_dir, seed);
        }
        if (*interp_cmd)
            return cmd_interpolate(input_path, checkpoint_dir, direction, alphas,
                                   out_dir, seed);
        if (*eval_cmd) return cmd_evaluate(pred_dir, gt_dir, mask_dir, out_dir);
        if (*inspect_cmd) return cmd_inspect(checkpoint_dir, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
