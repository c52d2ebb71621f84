#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "venibot/geometry.hpp"
#include "venibot/image.hpp"

namespace venibot::synth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameters of the procedural NIR forearm generator.
struct VeinTreeSpec {
  std::uint64_t seed = 1;
  int width = 208;
  int height = 128;

  int trunk_count = 2;
  /// Fixed screen angle (counter-clockwise degrees) for every trunk; random when unset.
  std::optional<double> trunk_angle_deg;
  Range trunk_angle_range{-40.0, 40.0};
  /// Probability that a growth segment ends in a bifurcation.
  double bifurcation_prob = 0.35;
  int max_branch_depth = 2;
  Range curvature_deg_per_px{0.0, 2.5};
  Range diameter_px{5.0, 9.0};
  Range segment_length_px{25.0, 60.0};
  Range branch_angle_deg{25.0, 55.0};
  Range branch_diameter_ratio{0.6, 0.85};

  double background = 0.75;
  double vein_core = 0.25;

  // Noise layers, drawn after ground truth is fixed.
  int hair_count = 5;
  int blemish_count = 3;
  double vignette = 0.15;
  double sensor_noise_sigma = 0.02;

  geometry::SuitabilityRules rules;
  int max_retries = 20;

  void validate() const;
  VeinTreeSpec noise_free() const;
};

struct Target {
  double cx = 0.0;
  double cy = 0.0;
  double phi_deg = 0.0;
  double length_px = 0.0;
};

struct SyntheticSample {
  GrayImage image;
  BinaryMask vein_gt;
  BinaryMask suitable_gt;
  std::vector<Target> targets;
  /// Per-pixel index (1-based) of the target owning each suitable pixel, 0 elsewhere.
  std::vector<int> target_labels;
  BinaryMask hair_mask;     // pixels touched by hair strokes
  BinaryMask blemish_mask;  // pixels touched by blemishes
};

SyntheticSample generate_sample(const VeinTreeSpec& spec);

/// Rebuilds the per-pixel target index from a suitable mask and its targets
/// (each target owns the component containing its centroid).
std::vector<int> label_targets(const BinaryMask& suitable, const std::vector<Target>& targets);

struct ManifestEntry {
  std::string sample_id;
  int volunteer_id = 0;
  std::string image_path;
  std::string vein_gt_path;
  std::string suitable_gt_path;
  std::vector<Target> targets;
};

struct Manifest {
  std::uint64_t master_seed = 0;
  std::vector<ManifestEntry> samples;
  std::filesystem::path root;  // directory the relative paths resolve against

  std::vector<int> volunteers() const;
};

std::uint64_t volunteer_seed(std::uint64_t master_seed, int volunteer_id);
std::uint64_t sample_seed(std::uint64_t master_seed, int volunteer_id, int image_index);

/// Writes images, masks and manifest.json under `out_dir`.
Manifest generate_corpus(const VeinTreeSpec& spec, int volunteers, int images_per_volunteer,
                         const std::filesystem::path& out_dir);

void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// A manifest entry loaded back into memory.
SyntheticSample load_sample(const Manifest& m, const ManifestEntry& e);

}  // namespace venibot::synth
