#include "vsgmn/config.hpp"

#include <fstream>
#include <sstream>

#include "vsgmn/errors.hpp"
#include "vsgmn/format.hpp"

namespace vsgmn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& value, const std::string& key) {
  try {
    return parse_double(value, "config key '" + key + "'");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

std::size_t to_size(const std::string& value, const std::string& key) {
  long long v = 0;
  try {
    v = parse_int(value, "config key '" + key + "'");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (v < 0) {
    throw ConfigError("config key '" + key + "' must be >= 0, got " + value);
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const std::string& value, const std::string& key) {
  return static_cast<std::uint64_t>(to_size(value, key));
}

}  // namespace

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "' expects true|false, got '" +
                    value + "'");
}

ConfigMap parse_config_text(std::string_view text, const std::string& origin) {
  ConfigMap entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": empty key");
    }
    entries[key] = value;
  }
  return entries;
}

ConfigMap parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.filename().string());
}

void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value) {
  if (key == "epochs") {
    config.epochs = to_size(value, key);
  } else if (key == "batch_size") {
    config.batch_size = to_size(value, key);
  } else if (key == "top_k") {
    config.top_k = to_size(value, key);
  } else if (key == "layers") {
    config.layers = to_size(value, key);
  } else if (key == "variant") {
    config.variant = variant_from_string(value);
  } else if (key == "temperature") {
    config.temperature = to_double(value, key);
  } else if (key == "cross_weight") {
    config.cross_weight = to_double(value, key);
  } else if (key == "lambda_reg") {
    config.weights.reg = to_double(value, key);
  } else if (key == "lambda_sc") {
    config.weights.sc = to_double(value, key);
  } else if (key == "lambda_crc") {
    config.weights.crc = to_double(value, key);
  } else if (key == "learning_rate") {
    config.optimizer.learning_rate = to_double(value, key);
  } else if (key == "momentum") {
    config.optimizer.momentum = to_double(value, key);
  } else if (key == "weight_decay") {
    config.optimizer.weight_decay = to_double(value, key);
  } else if (key == "seed") {
    config.seed = to_u64(value, key);
  } else if (key == "hidden_dim") {
    config.hidden_dim = to_size(value, key);
  } else if (key == "gamma") {
    config.gamma = to_double(value, key);
  } else if (key == "graph_match_enabled") {
    config.graph_match_enabled = parse_bool(value, key);
  } else if (key == "mask_enabled") {
    config.mask_enabled = parse_bool(value, key);
  } else if (key == "cross_graph_enabled") {
    config.cross_graph_enabled = parse_bool(value, key);
  } else if (key == "ace_pool") {
    if (value == "seen") {
      config.ace_pool = AcePool::seen;
    } else if (value == "all") {
      config.ace_pool = AcePool::all;
    } else {
      throw ConfigError("config key 'ace_pool' expects seen|all, got '" +
                        value + "'");
    }
  } else if (key == "ablation") {
    config.apply_ablation(ablation_from_string(value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig make_train_config(const ConfigMap& entries) {
  TrainConfig config;
  std::string ablation;
  for (const auto& [key, value] : entries) {
    if (key == "ablation") {
      ablation = value;  // presets apply last so they override flags
      continue;
    }
    apply_config_entry(config, key, value);
  }
  if (!ablation.empty()) apply_config_entry(config, "ablation", ablation);
  config.validate();
  return config;
}

SyntheticConfig make_synthetic_config(const ConfigMap& entries) {
  SyntheticConfig config;
  for (const auto& [key, value] : entries) {
    if (key == "seen_classes") {
      config.seen_classes = to_size(value, key);
    } else if (key == "unseen_classes") {
      config.unseen_classes = to_size(value, key);
    } else if (key == "attribute_dim") {
      config.attribute_dim = to_size(value, key);
    } else if (key == "feature_dim") {
      config.feature_dim = to_size(value, key);
    } else if (key == "samples_per_class") {
      config.samples_per_class = to_size(value, key);
    } else if (key == "noise_scale") {
      config.noise_scale = to_double(value, key);
    } else if (key == "train_fraction") {
      config.train_fraction = to_double(value, key);
    } else if (key == "seed") {
      config.seed = to_u64(value, key);
    } else {
      throw ConfigError("unknown synthetic config key '" + key + "'");
    }
  }
  return config;
}

SweepGrid parse_grid_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open grid file " + path.string());
  SweepGrid grid;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.filename().string() + ":" +
                        std::to_string(lineno) +
                        ": expected 'key = v1, v2, ...'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    std::vector<std::string> values;
    std::stringstream ss(stripped.substr(eq + 1));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string v = trim(cell);
      if (!v.empty()) values.push_back(v);
    }
    if (key.empty() || values.empty()) {
      throw ConfigError(path.filename().string() + ":" +
                        std::to_string(lineno) + ": empty key or value list");
    }
    grid.emplace_back(key, std::move(values));
  }
  if (grid.empty()) {
    throw ConfigError(path.filename().string() + ": grid file has no rows");
  }
  return grid;
}

}  // namespace vsgmn
