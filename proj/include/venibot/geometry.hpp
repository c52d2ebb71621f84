#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "venibot/image.hpp"
#include "venibot/vision.hpp"

namespace venibot::geometry {

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

struct Skeleton {
  int width = 0;
  int height = 0;
  std::vector<Point> pixels;  // raster order
  std::vector<int> degree;    // 8-neighbour count per pixel, parallel to `pixels`

  BinaryMask to_mask() const;
};

/// Thresholds that decide whether a vein section is a suitable puncture area.
struct SuitabilityRules {
  double min_length_px = 40.0;
  /// Cap on the locally averaged turning rate, applied at every point of a section.
  double max_mean_turning_deg_per_px = 1.5;
  int edge_margin_px = 8;
  double min_diameter_px = 4.0;

  void validate() const;
};

struct SegmentStats {
  int id = 0;  // 1-based branch id
  double arc_length_px = 0.0;  // full branch length
  double inner_length_px = 0.0;  // length clear of the edge margin and junction zones
  double mean_diameter_px = 0.0;
  double mean_turning_deg_per_px = 0.0;
  double max_turning_deg_per_px = 0.0;  // peak of the locally averaged turning
  bool has_bifurcation = false;
  bool touches_edge = false;
  std::vector<Point> path;  // ordered skeleton pixels of the branch
};

/// Result of analysing a mask: branches plus the junction pixels that split them.
struct SegmentAnalysis {
  std::vector<SegmentStats> segments;
  std::vector<Point> junctions;
  std::vector<double> junction_radius;  // erase radius (local diameter) per junction pixel
};

/// Orientation from second central moments. gamma_deg is the major-axis angle
/// measured from +x towards +y in image coordinates (y down), in [0,180).
struct EllipseFit {
  double cx = 0.0;
  double cy = 0.0;
  double a = 0.0;  // major half-axis
  double b = 0.0;  // minor half-axis
  double gamma_deg = 0.0;

  /// The same axis in the vertical-referenced convention of OpenCV's fitEllipse.
  double opencv_angle_deg() const;
};

struct PunctureTarget {
  int component = 0;
  double cx = 0.0;
  double cy = 0.0;
  double theta_deg = 0.0;  // continuous angle in [0,90]
  double phi_deg = 0.0;    // signed angle in (-90,90], counter-clockwise on screen
  EllipseFit fit;
};

// Angle helpers. Axis angles are undirected, so they live modulo 180.
double wrap_axis_deg(double deg);              // -> (-90, 90]
double axis_difference_deg(double a, double b);  // in [0, 90]
/// |gamma - 90| for an ellipse angle in the vertical-referenced convention.
double continuous_angle_deg(double opencv_gamma_deg);

Skeleton skeletonize(const BinaryMask& mask);

/// Exact Euclidean distance from every pixel to the nearest background pixel
/// (0 on background). Pixels outside the raster count as background.
std::vector<double> distance_transform(const BinaryMask& mask);

/// Locally averaged turning rate (deg/px) along an ordered path: 7-px moving
/// average, then the angle between the principal directions of the windows
/// (20 points, shorter on short paths) behind and ahead of each point, over
/// the arc between their centres. NaN where the windows do not fit.
std::vector<double> local_turning(std::span<const double> xs, std::span<const double> ys);

struct TurningSummary {
  double mean = 0.0;
  double max = 0.0;
  int samples = 0;
};

/// Turning over the inner stretches of a path (inner[i] != 0). Each stretch is
/// measured on its own, so distorted path ends at the raster border or inside
/// junction zones never enter a window. Falls back to the whole path when no
/// inner sample exists.
TurningSummary summarize_turning(std::span<const double> xs, std::span<const double> ys,
                                 std::span<const std::uint8_t> inner);

SegmentAnalysis analyze_segments(const BinaryMask& mask, const Skeleton& skel,
                                 const SuitabilityRules& rules);
/// Convenience overload that only needs the edge margin.
std::vector<SegmentStats> analyze_segments(const BinaryMask& mask, const Skeleton& skel,
                                           int edge_margin);

bool is_suitable(const SegmentStats& s, const SuitabilityRules& rules);

BinaryMask erase_unsuitable(const BinaryMask& mask, const SegmentAnalysis& analysis,
                            const SuitabilityRules& rules);

EllipseFit fit_component_angle(const vision::ComponentSet& components, int component);
EllipseFit fit_component_angle(const BinaryMask& mask, int component);

PunctureTarget continuous_angle(const EllipseFit& fit, const vision::ComponentSet& components,
                                int component);
PunctureTarget continuous_angle(const EllipseFit& fit, const BinaryMask& mask, int component);

struct ExtractionResult {
  std::vector<PunctureTarget> targets;
  BinaryMask suitable;
  int skipped = 0;  // components whose fit failed
};

ExtractionResult extract_targets_detailed(const BinaryMask& mask, const SuitabilityRules& rules);
std::vector<PunctureTarget> extract_targets(const BinaryMask& mask, const SuitabilityRules& rules);

/// Fit + continuous angle on every component of `mask` with at least `min_area`
/// pixels, without the suitability erasure. Degenerate components are skipped.
std::vector<PunctureTarget> targets_from_components(const vision::ComponentSet& components,
                                                    int min_area = 5);

}  // namespace venibot::geometry
