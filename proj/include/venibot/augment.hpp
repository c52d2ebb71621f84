#pragma once

#include <cstdint>
#include <vector>

#include "venibot/image.hpp"
#include "venibot/rng.hpp"
#include "venibot/synth.hpp"

namespace venibot::augment {

using synth::Range;

/// Random augmentation policy; the defaults are the standard training ranges.
struct AugmentPolicy {
  double p_vflip = 0.5;
  double p_hflip = 0.5;
  Range crop_scale{0.2, 1.0};   // fraction of the source area
  Range aspect_ratio{0.5, 2.0};  // crop width / height, sampled log-uniformly
  int out_width = 208;
  int out_height = 128;
  Range rotation_deg{-45.0, 45.0};  // counter-clockwise on screen
  Range brightness{0.8, 1.2};
  Range contrast{0.8, 1.2};
  Range saturation{0.8, 1.2};
  std::uint64_t seed = 0;

  void validate() const;
};

/// One concrete draw from a policy.
struct TransformDraw {
  bool hflip = false;
  bool vflip = false;
  // Crop window in source pixels (after flipping), x/y of the top-left corner.
  double crop_x = 0.0;
  double crop_y = 0.0;
  double crop_w = 0.0;
  double crop_h = 0.0;
  int out_width = 0;
  int out_height = 0;
  double rotation_deg = 0.0;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;

  static TransformDraw identity(int width, int height);
  double scale_x() const { return out_width / crop_w; }
  double scale_y() const { return out_height / crop_h; }
};

struct AugmentedSample {
  GrayImage image;
  BinaryMask vein;
  BinaryMask suitable;
  /// 1-based index into `targets` per pixel, 0 elsewhere. Targets whose
  /// component left the frame entirely are dropped and ids renumbered.
  std::vector<int> target_labels;
  std::vector<synth::Target> targets;  // phi transformed, centroid re-measured
  std::vector<int> source_index;  // index of each target in the input sample
  /// Per target: true when part of its component left the output frame.
  std::vector<bool> truncated;
  TransformDraw draw;
};

TransformDraw draw_transform(const AugmentPolicy& policy, Rng& rng, int src_width, int src_height);

/// Signed angle after the flip -> crop/resize -> rotate chain, in (-90, 90].
double transform_phi(double phi_deg, const TransformDraw& t);

AugmentedSample apply(const TransformDraw& t, const synth::SyntheticSample& sample);
AugmentedSample apply(const AugmentPolicy& policy, const synth::SyntheticSample& sample, Rng& rng);

/// Brightness multiplies, contrast scales about the mean, saturation is a
/// no-op on single-channel images; output clamped to [0,1].
GrayImage intensity_jitter(const GrayImage& img, double brightness, double contrast, double saturation);

/// Deterministic stream of augmentations: draw k uses a seed derived from
/// (policy.seed, k), so streams are reproducible and order-independent.
class Augmenter {
 public:
  explicit Augmenter(AugmentPolicy policy);
  AugmentedSample next(const synth::SyntheticSample& sample);
  std::uint64_t draws() const noexcept { return count_; }

 private:
  AugmentPolicy policy_;
  std::uint64_t count_ = 0;
};

}  // namespace venibot::augment
