#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "canonlift/dataset.hpp"
#include "canonlift/model.hpp"
#include "canonlift/trainer.hpp"

namespace canonlift {

/// Invalid configuration: unknown keys, bad values, wrong types.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvalConfig {
  std::vector<double> thresholds;  // empty = 0.05..0.95 step 0.05
  std::vector<int> views{1, 2, 3, 4};
  std::uint64_t seed = 0;
};

struct RunConfig {
  DatasetConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  int threads = 1;

  /// Model config with the grid size taken from the data section.
  ModelConfig resolved_model() const;
  std::vector<double> thresholds() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Strict: every key must exist in the defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Every dotted leaf key accepted by the loader.
std::vector<std::string> valid_keys();

/// Defaults, then the optional JSON file, then "dotted.key=value" overrides.
/// Values are parsed as JSON; a list key also accepts comma-separated items.
RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Writes resolved_config.json and config_hash.txt into dir.
void write_resolved_config(const std::filesystem::path& dir, const RunConfig& config);

}  // namespace canonlift
