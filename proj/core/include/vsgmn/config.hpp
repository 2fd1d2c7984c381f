#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "vsgmn/dataset.hpp"
#include "vsgmn/eval.hpp"
#include "vsgmn/train.hpp"

namespace vsgmn {

// Flat `key = value` configuration ('#' starts a comment, blank lines are
// skipped). Keys are unique; a repeated key keeps the last value.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(std::string_view text, const std::string& origin);
ConfigMap parse_config_file(const std::filesystem::path& path);

// Applies one training key. Unknown key or malformed value -> ConfigError.
// The `ablation` key applies a preset (and is applied last by
// make_train_config so presets override individual flags).
void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value);

TrainConfig make_train_config(const ConfigMap& entries);
SyntheticConfig make_synthetic_config(const ConfigMap& entries);

// Grid file for sweeps: `key = v1, v2, v3` per line; row order is kept.
SweepGrid parse_grid_file(const std::filesystem::path& path);

bool parse_bool(const std::string& value, const std::string& key);

}  // namespace vsgmn
