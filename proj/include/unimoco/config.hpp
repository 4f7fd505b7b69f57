#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "unimoco/eval.hpp"
#include "unimoco/pipeline.hpp"

namespace unimoco {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Everything a run needs, as read from one JSON document with the sections
/// `dataset`, `model`, `train` and `probe`. Missing keys take defaults;
/// unknown keys are rejected.
struct ExperimentConfig {
  DatasetSpec dataset;
  ModelConfig model;
  TrainConfig train;
  ProbeConfig probe;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError listing every problem found, not just the first.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Dataset spec alone, from either a bare spec object or a full config.
DatasetSpec parse_dataset_spec(const nlohmann::json& doc);

/// Fully populated document with sorted keys.
nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const DatasetSpec& spec);

/// Hex digest of the canonical config text; independent of key order in the
/// source file.
std::string config_digest(const ExperimentConfig& cfg);

/// "<seed>-<digest>"
std::string run_id(const ExperimentConfig& cfg);

}  // namespace unimoco
