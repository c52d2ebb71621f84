#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "venibot/geometry.hpp"

namespace venibot::planner {

/// Rigid image-to-gantry transform: robot_xy = R(rotation) * diag(sx, sy) * pixel + t.
/// The gantry xy frame is taken with the image's handedness, so angles in
/// both are counter-clockwise as seen from above.
struct Calibration {
  double sx_mm_per_px = 1.0;
  double sy_mm_per_px = 1.0;
  double tx_mm = 0.0;
  double ty_mm = 0.0;
  double rotation_deg = 0.0;
  int image_width = 208;
  int image_height = 128;

  void validate() const;
};

/// Motor setpoints: motor 1 translates y, motor 3 x, motor 4 rotates about z
/// (positive counter-clockwise seen from +z), motor 2 descends along z.
struct RobotPose {
  double motor1_y_mm = 0.0;
  double motor3_x_mm = 0.0;
  double motor4_rot_deg = 0.0;
  double motor2_z_mm = 0.0;
};

struct AxisRange {
  double min = 0.0;
  double max = 0.0;
};

struct WorkspaceLimits {
  AxisRange motor1_y_mm{-500.0, 500.0};
  AxisRange motor3_x_mm{-500.0, 500.0};
  AxisRange motor2_z_mm{0.0, 150.0};
  double motor4_max_abs_deg = 90.0;
  double travel_height_mm = 100.0;  // motor 2 height while moving in xy

  void validate() const;
};

/// Trapezoidal velocity profiles of the simulation.
struct MotionConfig {
  double vmax_mm_s = 50.0;
  double amax_mm_s2 = 200.0;
  double vmax_deg_s = 90.0;
  double amax_deg_s2 = 360.0;
  double sample_ms = 20.0;

  void validate() const;
};

struct PixelTarget {
  double cx = 0.0;
  double cy = 0.0;
  double phi_deg = 0.0;
};

/// Robot xy of a pixel position, and its inverse.
void pixel_to_robot(const Calibration& c, double px, double py, double& x_mm, double& y_mm);
void robot_to_pixel(const Calibration& c, double x_mm, double y_mm, double& px, double& py);

/// Image angle phi carried through the calibration's linear part, wrapped to (-90, 90].
double robot_angle_deg(const Calibration& c, double phi_deg);

/// Setpoints for a target; motor 2 stays at travel height. Throws DataError for
/// targets outside the image and WorkspaceError naming the violated axis.
RobotPose plan(const PixelTarget& target, const Calibration& calib, const WorkspaceLimits& limits);
RobotPose plan(const geometry::PunctureTarget& target, const Calibration& calib, const WorkspaceLimits& limits);

struct Event {
  double t_ms = 0.0;
  std::string axis;  // motor1, motor3, motor4, motor2
  double position = 0.0;
  std::string state;  // start, moving, reached, contact
};

/// Moves motors 1, 3, 4 one after another from `home` to the pose, then
/// lowers motor 2 from travel height to `contact_height_mm`. Every axis
/// reports "reached" before the next starts.
std::vector<Event> simulate_sequence(const RobotPose& pose, double contact_height_mm, const WorkspaceLimits& limits,
                                     const MotionConfig& motion, const RobotPose& home = {});

/// One JSON object per line: {"t_ms", "axis", "position", "state"}.
std::string to_json_lines(const std::vector<Event>& events);
std::string to_json(const RobotPose& pose);

}  // namespace venibot::planner
