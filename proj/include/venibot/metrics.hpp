#pragma once

#include <vector>

#include "venibot/geometry.hpp"
#include "venibot/image.hpp"

namespace venibot::metrics {

/// 2|A n B| / (|A| + |B|); two empty masks agree perfectly (1.0).
double dsc(const BinaryMask& a, const BinaryMask& b);

/// Undirected axis difference min(|a-b|, 180-|a-b|), in [0, 90].
double axis_error_deg(double a, double b);

/// A set of components as a label raster (0 = background, k = component k)
/// plus one signed angle per component.
struct LabelledAngles {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<double> phi_deg;  // phi_deg[k-1] belongs to label k
};

/// Per ground-truth component: the axis error against the predicted component
/// with the largest pixel overlap; 90 when nothing overlaps.
std::vector<double> angle_errors(const LabelledAngles& pred, const LabelledAngles& gt);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  int count = 0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace venibot::metrics
