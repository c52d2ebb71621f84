#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "venibot/augment.hpp"
#include "venibot/model.hpp"
#include "venibot/planner.hpp"
#include "venibot/synth.hpp"
#include "venibot/train.hpp"
#include "venibot/vision.hpp"

namespace venibot::config {

/// Everything a run needs, in one JSON document. Unknown keys are rejected,
/// missing keys keep their defaults. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
  synth::VeinTreeSpec synth;
  int volunteers = 30;
  int images_per_volunteer = 30;
  vision::LabelPipelineParams label;
  model::ArchConfig arch = model::ArchConfig::desk_scale();
  model::Topology topology = model::Topology::kDIDO;
  train::TrainConfig train;  // train.policy is the "augment" section
  std::uint64_t fold_seed = 0;
  int folds = 5;
  bool single_precision = false;
  planner::Calibration calibration;
  planner::WorkspaceLimits limits;
  planner::MotionConfig motion;
  double contact_height_mm = 20.0;
  std::filesystem::path manifest = "data/manifest.json";
  std::filesystem::path output_dir = "runs";

  void validate() const;
};

/// Parses a config document; `base_dir` anchors relative paths.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// Serializes every field (paths as given, not resolved).
std::string dump_run_config(const RunConfig& cfg, const std::filesystem::path& base_dir = ".");

/// Standalone sections, shared with other file formats.
vision::LabelPipelineParams parse_label_params(const std::string& text);
planner::Calibration parse_calibration(const std::string& text);

}  // namespace venibot::config
