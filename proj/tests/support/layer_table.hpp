#pragma once

// The reference layer table of the full-scale ResNeXt50-UNet at 128x208 input:
// stage name, output height x width, output channels.

#include <array>
#include <string_view>

namespace venibot::testing {

struct StageRow {
  std::string_view name;
  int h, w, channels;
};

inline constexpr std::array<StageRow, 15> kTableStages{{
    {"Conv0", 64, 104, 64},
    {"Res-layer1", 64, 104, 256},
    {"Res-layer2", 32, 52, 512},
    {"Res-layer3", 16, 26, 1024},
    {"Res-layer4", 8, 13, 2048},
    {"Conv5", 8, 13, 2048},
    {"TransConv6", 16, 26, 1024},
    {"ConvBlock7", 16, 26, 1024},
    {"TransConv8", 32, 52, 512},
    {"ConvBlock9", 32, 52, 512},
    {"TransConv10", 64, 104, 256},
    {"ConvBlock11", 64, 104, 256},
    {"TransConv12", 128, 208, 128},
    {"ConvBlock13", 128, 208, 64},
    {"Conv14", 128, 208, 1},
}};

inline constexpr double kTableParams = 123.2e6;
inline constexpr double kTableFlops = 52.1e9;

}  // namespace venibot::testing
