#pragma once

// Small raster fixtures shared by the tests and the acceptance runner.

#include <cmath>
#include <numbers>

#include "venibot/image.hpp"

namespace venibot::testing {

/// Filled bar of the given length and thickness centred at (cx, cy), with its
/// long axis at `phi_deg` counter-clockwise on screen (y points down).
inline BinaryMask rasterize_bar(int width, int height, double cx, double cy, double phi_deg, double length,
                                double thickness) {
  BinaryMask m(width, height);
  const double p = phi_deg * std::numbers::pi / 180.0;
  const double ux = std::cos(p), uy = -std::sin(p);  // axis direction in raster coordinates
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double along = dx * ux + dy * uy, across = -dx * uy + dy * ux;
      if (std::abs(along) <= length / 2 && std::abs(across) <= thickness / 2) m.set(x, y);
    }
  return m;
}

}  // namespace venibot::testing
