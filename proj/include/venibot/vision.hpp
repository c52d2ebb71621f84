#pragma once

#include <vector>

#include "venibot/image.hpp"

namespace venibot::vision {

enum class MorphOp { kErode, kDilate };
enum class VesselPolarity { kDarkOnBright, kBrightOnDark };

/// Parameters of the classical vein labeling chain. The defaults are the
/// frozen calibration (the "label" section of config/default.json).
struct LabelPipelineParams {
  double gaussian_sigma = 1.0;
  int erode_radius = 2;
  int dilate_radius = 2;
  double brightness_gain = 1.0;
  std::vector<double> vesselness_scales = {1.5, 2.0, 3.0, 4.0};
  double vesselness_beta = 0.5;
  /// Structureness constant c as a fraction of the per-scale maximum Hessian
  /// Frobenius norm.
  double vesselness_c_fraction = 0.5;
  VesselPolarity polarity = VesselPolarity::kDarkOnBright;
  double threshold = 0.25;
  int min_component_area = 30;

  void validate() const;
};

struct ComponentStats {
  int id = 0;
  int area = 0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  double cx = 0.0, cy = 0.0;
};

/// 8-connected labeling; ids 1..K in raster order of each component's first pixel.
struct ComponentSet {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // 0 = background
  std::vector<ComponentStats> stats;  // stats[k-1] describes id k

  int count() const noexcept { return static_cast<int>(stats.size()); }
  int label(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  BinaryMask mask_of(int id) const;
};

GrayImage gaussian_blur(const GrayImage& img, double sigma);

GrayImage morph(const GrayImage& img, MorphOp op, int radius);
BinaryMask morph(const BinaryMask& mask, MorphOp op, int radius);

GrayImage histogram_normalize(const GrayImage& img);
GrayImage invert(const GrayImage& img);

/// Multiscale Frangi tubularity, max over scales, rescaled to [0,1].
GrayImage hessian_vesselness(const GrayImage& img, const LabelPipelineParams& params);

BinaryMask binarize(const GrayImage& img, double threshold);

ComponentSet connected_components(const BinaryMask& mask);
BinaryMask drop_small_components(const BinaryMask& mask, int min_area);

/// blur -> open -> gain -> normalize -> vesselness -> binarize -> drop small components.
BinaryMask label_vein(const GrayImage& img, const LabelPipelineParams& params);

}  // namespace venibot::vision
