#include "monoview/train/checkpoint.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "monoview/io/weights_io.hpp"

namespace monoview::train {

namespace fs = std::filesystem;

std::string to_string(Phase p) {
    switch (p) {
        case Phase::I: return "I";
        case Phase::II: return "II";
        case Phase::III: return "III";
    }
    return "?";
}

Phase phase_from_int(int p) {
    require(p >= 1 && p <= 3, "phase must be 1, 2 or 3");
    return static_cast<Phase>(p);
}

bool Checkpoint::has_completed(int phase_number) const {
    return std::find(completed_phases.begin(), completed_phases.end(),
                     phase_number) != completed_phases.end();
}

Checkpoint Checkpoint::capture_model(const nn::ModelGraph& graph) {
    Checkpoint ckpt;
    for (const nn::NetworkComponent* c : graph.components())
        for (const nn::ParamEntry& e : c->params().entries())
            ckpt.model.emplace_back(c->name() + "/" + e.name, e.value);
    return ckpt;
}

void Checkpoint::apply_model(nn::ModelGraph& graph) const {
    std::map<std::string, const Tensorf*> by_name;
    for (const auto& [name, tensor] : model) by_name[name] = &tensor;
    std::size_t used = 0;
    for (nn::NetworkComponent* c : graph.components())
        for (nn::ParamEntry& e : c->params().entries()) {
            const std::string qualified = c->name() + "/" + e.name;
            auto it = by_name.find(qualified);
            require(it != by_name.end(), "checkpoint is missing tensor '" + qualified + "'");
            require(it->second->shape() == e.value.shape(),
                    "checkpoint tensor '" + qualified + "' has shape " +
                        it->second->shape().str() + ", expected " + e.value.shape().str());
            e.value = *it->second;
            ++used;
        }
    require(used == by_name.size(), "checkpoint holds tensors unknown to the model");
}

void Checkpoint::save(const std::string& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "cannot create checkpoint directory " + dir);

    std::vector<std::pair<std::string, const Tensorf*>> model_ptrs;
    model_ptrs.reserve(model.size());
    for (const auto& [name, tensor] : model) model_ptrs.emplace_back(name, &tensor);
    io::save_tensors((fs::path(dir) / "model").string(), model_ptrs);

    std::vector<std::pair<std::string, const Tensorf*>> optim_ptrs;
    optim_ptrs.reserve(optim.size());
    for (const auto& [name, tensor] : optim) optim_ptrs.emplace_back(name, &tensor);
    io::save_tensors((fs::path(dir) / "optim").string(), optim_ptrs);

    std::ofstream meta(fs::path(dir) / "meta.txt");
    require(meta.good(), "cannot write checkpoint meta in " + dir);
    meta << "format=monoview-checkpoint v1\n";
    meta << "phase=" << phase << "\n";
    meta << "end_to_end=" << (end_to_end ? 1 : 0) << "\n";
    meta << "epoch=" << epoch << "\n";
    std::ostringstream metric;
    metric.precision(17);
    metric << best_metric;
    meta << "best_metric=" << metric.str() << "\n";
    meta << "adam_step=" << adam_step << "\n";
    meta << "seed=" << seed << "\n";
    meta << "completed=";
    for (std::size_t i = 0; i < completed_phases.size(); ++i)
        meta << (i ? "," : "") << completed_phases[i];
    meta << "\n";
    meta << "rng=" << rng_state << "\n";
    require(meta.good(), "short write of checkpoint meta in " + dir);
}

Checkpoint Checkpoint::load(const std::string& dir) {
    Checkpoint ckpt;
    ckpt.model = io::load_tensors((fs::path(dir) / "model").string());
    ckpt.optim = io::load_tensors((fs::path(dir) / "optim").string());

    std::ifstream meta(fs::path(dir) / "meta.txt");
    require(meta.good(), "cannot open checkpoint meta in " + dir);
    std::string line;
    bool format_ok = false;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "format") {
            require(value == "monoview-checkpoint v1",
                    dir + ": unrecognized checkpoint format '" + value + "'");
            format_ok = true;
        } else if (key == "phase") {
            ckpt.phase = std::stoi(value);
        } else if (key == "end_to_end") {
            ckpt.end_to_end = value == "1";
        } else if (key == "epoch") {
            ckpt.epoch = std::stoi(value);
        } else if (key == "best_metric") {
            ckpt.best_metric = std::stod(value);
        } else if (key == "adam_step") {
            ckpt.adam_step = std::stoll(value);
        } else if (key == "seed") {
            ckpt.seed = std::stoull(value);
        } else if (key == "completed") {
            std::istringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty()) ckpt.completed_phases.push_back(std::stoi(tok));
        } else if (key == "rng") {
            ckpt.rng_state = value;
        }
    }
    require(format_ok, dir + ": checkpoint meta has no format line");
    return ckpt;
}

} // namespace monoview::train
