#pragma once

// Flat `key = value` experiment configuration and run manifests.
//
// A manifest is the resolved configuration plus the reserved keys `command`,
// `version` and `input.<name>`; it loads back as a configuration file.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "m3d/objective.hpp"

namespace m3d {

inline constexpr const char* kVersion = "0.3.0";

struct ExperimentConfig {
  LossWeights weights;
  ObjectiveConfig objective;
  OptimizerConfig optimizer;

  std::string synth = "plane";
  int synth_height = 64;
  int synth_width = 80;
  /// Dataset frames are resized to this resolution; 0 keeps the native size.
  int work_height = 256;
  int work_width = 320;

  /// Evaluation depth cap; 0 disables clipping.
  double max_depth = 0.0;
  bool median_scaling = false;
  /// Depth PNG unit: depth = count * depth_png_units.
  double depth_png_units = 0.001;

  int ablation_seeds = 5;
  /// Ablation depth cap as a multiple of the largest ground-truth depth.
  double ablation_depth_cap = 2.0;

  double sl_threshold = 0.05;
  double sl_epsilon = 0.02;
};

/// Sorted list of every configuration key.
std::vector<std::string> config_keys();

/// Sets one key from its text form; throws InvalidArgument for unknown keys
/// or unparsable values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);

struct ParsedConfigFile {
  ExperimentConfig config;
  /// Reserved manifest keys (`command`, `version`, `input.*`) found in the file.
  std::map<std::string, std::string> reserved;
};

/// Parses `key = value` lines; `#` starts a comment. Keys may appear once.
ParsedConfigFile parse_config(const std::string& text, const ExperimentConfig& base = {});
ParsedConfigFile load_config(const std::filesystem::path& path, const ExperimentConfig& base = {});

/// Checks value ranges across all sub-configurations.
void validate(const ExperimentConfig& cfg);

/// Sorted `key = value` text: command, version, inputs, then the config.
std::string manifest_text(const ExperimentConfig& cfg, const std::string& command,
                          const std::map<std::string, std::string>& inputs);

}  // namespace m3d
