#include <doctest.h>

#include <cmath>

#include "venibot/errors.hpp"
#include "venibot/planner.hpp"
#include "venibot/rng.hpp"

using namespace venibot;

TEST_SUITE("planner") {
  TEST_CASE("identity calibration passes coordinates and angle through") {
    const auto pose = planner::plan(planner::PixelTarget{10, 20, 15}, {}, {});
    CHECK(pose.motor3_x_mm == doctest::Approx(10.0));
    CHECK(pose.motor1_y_mm == doctest::Approx(20.0));
    CHECK(pose.motor4_rot_deg == doctest::Approx(15.0));
    CHECK(pose.motor2_z_mm == planner::WorkspaceLimits{}.travel_height_mm);
  }

  TEST_CASE("a quarter-turn calibration maps image x onto robot y") {
    planner::Calibration c;
    c.rotation_deg = 90.0;
    double x = 0, y = 0;
    planner::pixel_to_robot(c, 10.0, 0.0, x, y);
    CHECK(x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y == doctest::Approx(10.0));
  }

  TEST_CASE("pixel to robot to pixel round trip") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      planner::Calibration c;
      c.sx_mm_per_px = rng.uniform(0.05, 2.0);
      c.sy_mm_per_px = rng.uniform(0.05, 2.0);
      c.tx_mm = rng.uniform(-100, 100);
      c.ty_mm = rng.uniform(-100, 100);
      c.rotation_deg = rng.uniform(-180, 180);
      const double px = rng.uniform(0, 207), py = rng.uniform(0, 127);
      double x, y, qx, qy;
      planner::pixel_to_robot(c, px, py, x, y);
      planner::robot_to_pixel(c, x, y, qx, qy);
      CHECK(std::hypot(qx - px, qy - py) < 1e-9);
    }
  }

  TEST_CASE("motor 4 follows the sign of phi") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
      planner::Calibration c;
      c.sx_mm_per_px = rng.uniform(0.1, 1.0);
      c.sy_mm_per_px = rng.uniform(0.1, 1.0);
      const double phi = rng.uniform(1.0, 89.0);
      const double a = planner::robot_angle_deg(c, phi), b = planner::robot_angle_deg(c, -phi);
      CHECK(a > 0.0);
      CHECK(b == doctest::Approx(-a));
    }
    CHECK(planner::robot_angle_deg({}, 0.0) == doctest::Approx(0.0));
  }

  TEST_CASE("calibration rotation shifts the angle and wraps to (-90, 90]") {
    planner::Calibration c;
    c.rotation_deg = -30.0;  // carries 80 deg to 110 deg, which wraps to -70 deg
    const double a = planner::robot_angle_deg(c, 80.0);
    CHECK(a > -90.0);
    CHECK(a <= 90.0);
    CHECK(std::abs(std::abs(a) - 70.0) < 1e-9);
  }

  TEST_CASE("workspace errors name the axis") {
    planner::WorkspaceLimits lim;
    lim.motor3_x_mm = {0.0, 5.0};
    try {
      planner::plan(planner::PixelTarget{10, 20, 0}, {}, lim);
      FAIL("expected a workspace error");
    } catch (const WorkspaceError& e) {
      CHECK(e.axis() == "motor3");
    }
    lim = {};
    lim.motor4_max_abs_deg = 30.0;
    try {
      planner::plan(planner::PixelTarget{10, 20, 45}, {}, lim);
      FAIL("expected a workspace error");
    } catch (const WorkspaceError& e) {
      CHECK(e.axis() == "motor4");
    }
  }

  TEST_CASE("targets outside the image are data errors") {
    CHECK_THROWS_AS(planner::plan(planner::PixelTarget{-1, 20, 0}, {}, {}), DataError);
    CHECK_THROWS_AS(planner::plan(planner::PixelTarget{10, 128, 0}, {}, {}), DataError);
  }

  TEST_CASE("event order: motors 1, 3, 4, then the descent") {
    const auto pose = planner::plan(planner::PixelTarget{100, 60, -20}, {}, {});
    const auto log = planner::simulate_sequence(pose, 20.0, {}, {});
    const std::vector<std::string> order{"motor1", "motor3", "motor4", "motor2"};
    std::size_t stage = 0;
    double t = 0.0;
    for (const auto& e : log) {
      CHECK(e.t_ms >= t);
      t = e.t_ms;
      while (stage < order.size() && e.axis != order[stage]) ++stage;
      REQUIRE(stage < order.size());
    }
    CHECK(log.back().state == "contact");
    CHECK(log.back().position == 20.0);
    // Every xy/rotation axis reports its setpoint before motor 2 starts.
    std::size_t first_descent = 0;
    while (log[first_descent].axis != "motor2") ++first_descent;
    CHECK(log[first_descent - 1].state == "reached");
    CHECK(log[first_descent - 1].position == doctest::Approx(pose.motor4_rot_deg));
  }

  TEST_CASE("descent is monotonic and respects the velocity limit") {
    planner::MotionConfig m;
    const auto log = planner::simulate_sequence({}, 10.0, {}, m);
    double prev_z = 1e9, prev_t = -1;
    for (const auto& e : log) {
      if (e.axis != "motor2") continue;
      CHECK(e.position <= prev_z + 1e-12);
      if (prev_t >= 0 && e.t_ms > prev_t)
        CHECK((prev_z - e.position) / ((e.t_ms - prev_t) / 1000.0) <= m.vmax_mm_s + 1e-9);
      prev_z = e.position;
      prev_t = e.t_ms;
    }
  }

  TEST_CASE("zero-displacement descent emits a single contact event") {
    planner::WorkspaceLimits lim;
    const auto log = planner::simulate_sequence({}, lim.travel_height_mm, lim, {});
    int n = 0;
    for (const auto& e : log)
      if (e.axis == "motor2" && e.state != "start") {
        ++n;
        CHECK(e.state == "contact");
      }
    CHECK(n == 1);
  }

  TEST_CASE("contact below the z limit") {
    try {
      planner::simulate_sequence({}, -5.0, {}, {});
      FAIL("expected a workspace error");
    } catch (const WorkspaceError& e) {
      CHECK(e.axis() == "motor2");
    }
  }

  TEST_CASE("json lines") {
    const auto lines = planner::to_json_lines({{0.0, "motor1", 1.5, "start"}});
    CHECK(lines == "{\"t_ms\":0.0,\"axis\":\"motor1\",\"position\":1.5,\"state\":\"start\"}\n");
  }
}
