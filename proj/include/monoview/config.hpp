#pragma once

#include <string>

#include "monoview/data/datapipe.hpp"
#include "monoview/train/trainer.hpp"

namespace monoview {

/// Runtime configuration shared by the CLI subcommands. File format: one
/// `key = value` per line, `#` comments. Unknown keys are errors. Flags given
/// on the command line override file values.
struct AppConfig {
    data::DatasetSpec dataset;
    train::TrainConfig train;
    std::string out_dir = "out";
};

/// Apply one key/value pair; errors on unknown keys or unparseable values.
void apply_config_entry(AppConfig& cfg, const std::string& key, const std::string& value);

/// Parse a config file into `cfg` (over its current values).
void load_config_file(AppConfig& cfg, const std::string& path);

/// The full key schema, for help output and docs.
std::string config_schema();

} // namespace monoview
