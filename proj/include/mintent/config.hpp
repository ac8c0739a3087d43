#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "mintent/model.hpp"
#include "mintent/synthetic.hpp"

namespace mintent {

// Configuration file: RunConfig keys at the top level, an optional "synthetic"
// object for gen-synth, and optional "data"/"out" paths that command-line flags
// override. Unknown keys are rejected; missing keys keep their defaults.
struct ExperimentConfig {
  RunConfig run;
  SyntheticSpec synthetic;
  std::optional<std::string> data;
  std::optional<std::string> out;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
nlohmann::ordered_json to_json(const SyntheticSpec& spec);

// Both throw ConfigError on unknown keys or wrongly typed values.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
SyntheticSpec synthetic_from_json(const nlohmann::json& j, SyntheticSpec base = {});

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Keys whose values differ between two configurations, in to_json order.
std::vector<std::string> config_differences(const RunConfig& a, const RunConfig& b);

}  // namespace mintent
