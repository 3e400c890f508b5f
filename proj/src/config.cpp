#include "monoview/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace monoview {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T out{};
    ss >> out;
    require(!ss.fail(), "config: cannot parse value '" + value + "' for key '" + key + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    fail("config: cannot parse boolean '" + value + "' for key '" + key + "'");
}

} // namespace

void apply_config_entry(AppConfig& cfg, const std::string& key, const std::string& value) {
    using Setter = std::function<void(AppConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"dataset.root", [](AppConfig& c, const std::string&, const std::string& v) { c.dataset.root = v; }},
        {"dataset.left_dir", [](AppConfig& c, const std::string&, const std::string& v) { c.dataset.left_dir = v; }},
        {"dataset.right_dir", [](AppConfig& c, const std::string&, const std::string& v) { c.dataset.right_dir = v; }},
        {"dataset.glob", [](AppConfig& c, const std::string&, const std::string& v) { c.dataset.file_glob = v; }},
        {"dataset.patch_h", [](AppConfig& c, const std::string& k, const std::string& v) { c.dataset.patch_h = parse_number<int>(k, v); }},
        {"dataset.patch_w", [](AppConfig& c, const std::string& k, const std::string& v) { c.dataset.patch_w = parse_number<int>(k, v); }},
        {"dataset.augment_fraction", [](AppConfig& c, const std::string& k, const std::string& v) { c.dataset.augment_fraction = parse_number<float>(k, v); }},
        {"dataset.val_count", [](AppConfig& c, const std::string& k, const std::string& v) { c.dataset.val_count = parse_number<int>(k, v); }},
        {"dataset.split_file", [](AppConfig& c, const std::string&, const std::string& v) { c.dataset.split_file = v; }},
        {"train.lr", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.lr = parse_number<float>(k, v); }},
        {"train.beta1", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.beta1 = parse_number<float>(k, v); }},
        {"train.beta2", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.beta2 = parse_number<float>(k, v); }},
        {"train.batch_size", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = parse_number<int>(k, v); }},
        {"train.lr_patience", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.lr_patience = parse_number<int>(k, v); }},
        {"train.stop_patience", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.stop_patience = parse_number<int>(k, v); }},
        {"train.max_epochs", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.max_epochs = parse_number<int>(k, v); }},
        {"train.max_steps", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.max_steps = parse_number<std::int64_t>(k, v); }},
        {"train.seed", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
        {"train.gamma", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.gamma = parse_number<float>(k, v); }},
        {"train.deterministic", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.deterministic = parse_bool(k, v); }},
        {"loss.lambda0", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda0 = parse_number<float>(k, v); }},
        {"loss.lambda1", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda1 = parse_number<float>(k, v); }},
        {"loss.lambda2", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda2 = parse_number<float>(k, v); }},
        {"loss.lambda3", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda3 = parse_number<float>(k, v); }},
        {"loss.lambda4", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda4 = parse_number<float>(k, v); }},
        {"loss.lambda5", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda5 = parse_number<float>(k, v); }},
        {"loss.lambda6", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda6 = parse_number<float>(k, v); }},
        {"loss.lambda7", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda7 = parse_number<float>(k, v); }},
        {"loss.lambda8", [](AppConfig& c, const std::string& k, const std::string& v) { c.train.loss_weights.lambda8 = parse_number<float>(k, v); }},
        {"out_dir", [](AppConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
    };
    auto it = setters.find(key);
    require(it != setters.end(), "config: unknown key '" + key + "'");
    it->second(cfg, key, value);
}

void load_config_file(AppConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos,
                path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string config_schema() {
    return "dataset.root, dataset.left_dir, dataset.right_dir, dataset.glob,\n"
           "dataset.patch_h, dataset.patch_w, dataset.augment_fraction,\n"
           "dataset.val_count, dataset.split_file,\n"
           "train.lr, train.beta1, train.beta2, train.batch_size,\n"
           "train.lr_patience, train.stop_patience, train.max_epochs,\n"
           "train.max_steps, train.seed, train.gamma, train.deterministic,\n"
           "loss.lambda0 .. loss.lambda8, out_dir";
}

} // namespace monoview
