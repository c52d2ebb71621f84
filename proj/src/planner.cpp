#include "venibot/planner.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "venibot/errors.hpp"

namespace venibot::planner {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

void check_range(AxisRange r, const char* axis) {
  if (!(r.min < r.max)) throw ConfigError(std::string("limits: ") + axis + " needs min < max");
}

void check_axis(double v, AxisRange r, const char* axis) {
  if (v < r.min || v > r.max) {
    std::ostringstream os;
    os << axis << " setpoint " << v << " outside [" << r.min << ", " << r.max << "]";
    throw WorkspaceError(axis, os.str());
  }
}

}  // namespace

void Calibration::validate() const {
  if (!(sx_mm_per_px > 0.0) || !(sy_mm_per_px > 0.0)) throw ConfigError("calibration: scales must be > 0");
  if (image_width <= 0 || image_height <= 0) throw ConfigError("calibration: image size must be positive");
}

void WorkspaceLimits::validate() const {
  check_range(motor1_y_mm, "motor1");
  check_range(motor3_x_mm, "motor3");
  check_range(motor2_z_mm, "motor2");
  if (!(motor4_max_abs_deg > 0.0)) throw ConfigError("limits: motor4 range must be > 0");
  if (travel_height_mm < motor2_z_mm.min || travel_height_mm > motor2_z_mm.max)
    throw ConfigError("limits: travel height outside the motor2 range");
}

void MotionConfig::validate() const {
  if (!(vmax_mm_s > 0.0 && amax_mm_s2 > 0.0 && vmax_deg_s > 0.0 && amax_deg_s2 > 0.0 && sample_ms > 0.0))
    throw ConfigError("motion: velocities, accelerations and sample period must be > 0");
}

void pixel_to_robot(const Calibration& c, double px, double py, double& x_mm, double& y_mm) {
  const double r = c.rotation_deg / kDeg;
  const double u = c.sx_mm_per_px * px, v = c.sy_mm_per_px * py;
  x_mm = std::cos(r) * u - std::sin(r) * v + c.tx_mm;
  y_mm = std::sin(r) * u + std::cos(r) * v + c.ty_mm;
}

void robot_to_pixel(const Calibration& c, double x_mm, double y_mm, double& px, double& py) {
  const double r = c.rotation_deg / kDeg;
  const double dx = x_mm - c.tx_mm, dy = y_mm - c.ty_mm;
  px = (std::cos(r) * dx + std::sin(r) * dy) / c.sx_mm_per_px;
  py = (-std::sin(r) * dx + std::cos(r) * dy) / c.sy_mm_per_px;
}

double robot_angle_deg(const Calibration& c, double phi_deg) {
  // The axis direction in pixel coordinates (y down) is (cos phi, -sin phi).
  const double p = phi_deg / kDeg;
  double x0, y0, x1, y1;
  pixel_to_robot(c, 0.0, 0.0, x0, y0);
  pixel_to_robot(c, std::cos(p), -std::sin(p), x1, y1);
  return geometry::wrap_axis_deg(std::atan2(-(y1 - y0), x1 - x0) * kDeg);
}

RobotPose plan(const PixelTarget& target, const Calibration& calib, const WorkspaceLimits& limits) {
  calib.validate();
  limits.validate();
  if (!(target.cx >= 0.0 && target.cy >= 0.0 && target.cx <= calib.image_width - 1 &&
        target.cy <= calib.image_height - 1))
    throw DataError("plan: target pixel outside the image");
  RobotPose pose;
  pixel_to_robot(calib, target.cx, target.cy, pose.motor3_x_mm, pose.motor1_y_mm);
  pose.motor4_rot_deg = robot_angle_deg(calib, target.phi_deg);
  pose.motor2_z_mm = limits.travel_height_mm;
  check_axis(pose.motor1_y_mm, limits.motor1_y_mm, "motor1");
  check_axis(pose.motor3_x_mm, limits.motor3_x_mm, "motor3");
  check_axis(pose.motor4_rot_deg, {-limits.motor4_max_abs_deg, limits.motor4_max_abs_deg}, "motor4");
  return pose;
}

RobotPose plan(const geometry::PunctureTarget& target, const Calibration& calib, const WorkspaceLimits& limits) {
  return plan(PixelTarget{target.cx, target.cy, target.phi_deg}, calib, limits);
}

namespace {

// Position along a trapezoidal (or triangular) profile covering `dist` >= 0.
struct Trapezoid {
  double dist, vmax, amax, t_acc, t_cruise, v_peak;

  Trapezoid(double d, double v, double a) : dist(d), vmax(v), amax(a) {
    if (d * a >= v * v) {
      v_peak = v;
      t_acc = v / a;
      t_cruise = (d - v * v / a) / v;
    } else {
      v_peak = std::sqrt(d * a);
      t_acc = v_peak / a;
      t_cruise = 0.0;
    }
  }

  double duration() const { return 2.0 * t_acc + t_cruise; }

  double at(double t) const {
    if (t <= 0.0) return 0.0;
    if (t < t_acc) return 0.5 * amax * t * t;
    const double d_acc = 0.5 * amax * t_acc * t_acc;
    if (t < t_acc + t_cruise) return d_acc + v_peak * (t - t_acc);
    const double td = std::min(t - t_acc - t_cruise, t_acc);
    return std::min(dist, d_acc + v_peak * t_cruise + v_peak * td - 0.5 * amax * td * td);
  }
};

void move(std::vector<Event>& log, double& clock_ms, const char* axis, double from, double to, double vmax,
          double amax, double sample_ms, const char* final_state = "reached") {
  const double dist = std::abs(to - from);
  const double dir = to >= from ? 1.0 : -1.0;
  log.push_back({clock_ms, axis, from, "start"});
  if (dist > 0.0) {
    const Trapezoid tp(dist, vmax, amax);
    const double total_ms = tp.duration() * 1000.0;
    for (double t = sample_ms; t < total_ms; t += sample_ms)
      log.push_back({clock_ms + t, axis, from + dir * tp.at(t / 1000.0), "moving"});
    clock_ms += total_ms;
  }
  log.push_back({clock_ms, axis, to, final_state});
}

}  // namespace

std::vector<Event> simulate_sequence(const RobotPose& pose, double contact_height_mm, const WorkspaceLimits& limits,
                                     const MotionConfig& motion, const RobotPose& home) {
  limits.validate();
  motion.validate();
  if (contact_height_mm < limits.motor2_z_mm.min)
    throw WorkspaceError("motor2", "contact height below the motor2 limit");
  if (contact_height_mm > limits.travel_height_mm)
    throw ParameterError("contact height above travel height: motor 2 only descends");
  check_axis(pose.motor1_y_mm, limits.motor1_y_mm, "motor1");
  check_axis(pose.motor3_x_mm, limits.motor3_x_mm, "motor3");
  check_axis(pose.motor4_rot_deg, {-limits.motor4_max_abs_deg, limits.motor4_max_abs_deg}, "motor4");

  std::vector<Event> log;
  double clock = 0.0;
  const double dt = motion.sample_ms;
  move(log, clock, "motor1", home.motor1_y_mm, pose.motor1_y_mm, motion.vmax_mm_s, motion.amax_mm_s2, dt);
  move(log, clock, "motor3", home.motor3_x_mm, pose.motor3_x_mm, motion.vmax_mm_s, motion.amax_mm_s2, dt);
  move(log, clock, "motor4", home.motor4_rot_deg, pose.motor4_rot_deg, motion.vmax_deg_s, motion.amax_deg_s2, dt);
  // Descent starts only here, after all three axes have reported "reached".
  move(log, clock, "motor2", limits.travel_height_mm, contact_height_mm, motion.vmax_mm_s, motion.amax_mm_s2, dt,
       "contact");
  return log;
}

std::string to_json_lines(const std::vector<Event>& events) {
  std::string out;
  for (const auto& e : events) {
    nlohmann::ordered_json j{{"t_ms", e.t_ms}, {"axis", e.axis}, {"position", e.position}, {"state", e.state}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string to_json(const RobotPose& pose) {
  nlohmann::ordered_json j{{"motor1_y_mm", pose.motor1_y_mm},
                           {"motor3_x_mm", pose.motor3_x_mm},
                           {"motor4_rot_deg", pose.motor4_rot_deg},
                           {"motor2_z_mm", pose.motor2_z_mm}};
  return j.dump();
}

}  // namespace venibot::planner
