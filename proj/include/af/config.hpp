#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "af/density.hpp"
#include "af/metrics.hpp"
#include "af/training.hpp"
#include "json.hpp"

namespace af {

struct PathSpec {
  PathKind kind = PathKind::Geometric;
  int steps = 1;
  int refinement_blocks = 0;          // Geometric: extra blocks at beta = 1
  std::vector<double> betas;          // optional explicit schedule

  nlohmann::json to_json() const;
  static PathSpec from_json(const nlohmann::json& j);
  AnnealingPath build(TargetDensity target) const;
};

struct MetricOptions {
  int wasserstein_cap = 2000;
  int mmd_bandwidth_cap = 4096;
  double mode_radius = -1.0;  // < 0: 3 * component std
  nlohmann::json to_json() const;
  static MetricOptions from_json(const nlohmann::json& j);
};

// One experiment: target, annealing path, training setup, metric options and
// the global seed every random stream derives from. Unknown config keys are
// rejected so typos never pass silently.
struct ExperimentConfig {
  std::string name;  // preset name when applicable
  std::string description;
  nlohmann::json target_json;
  PathSpec path;
  TrainConfig train;
  MetricOptions metrics;
  std::string output_dir = "af-out";
  std::uint64_t seed = 1;

  TargetDensity build_target() const;
  AnnealingPath build_path() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load_file(const std::string& path);
};

// Ready-made experiment configurations; see preset_names() for the catalog.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);

}  // namespace af
