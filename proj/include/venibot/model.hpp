#pragma once

#include <array>
#include <string>
#include <vector>

#include "venibot/nn/graph.hpp"

namespace venibot::model {

/// ResNeXt50-UNet size. Channel counts of the reference table are divided by
/// `width_divisor`; grouped convolutions use `cardinality` groups.
struct ArchConfig {
  int width_divisor = 8;
  int cardinality = 4;
  std::array<int, 4> depths{3, 5, 6, 3};
  int height = 64;
  int width = 104;
  bool batch_norm = true;

  static ArchConfig full_scale();  // divisor 1, C=32, 128x208
  static ArchConfig desk_scale();  // divisor 8, C=4, 64x104

  /// Throws ConfigError on widths not divisible by the divisor/cardinality or
  /// input sizes the decoder cannot restore exactly.
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

enum class Topology { kSISO, kSIDO, kDISO, kDIDO };

std::string to_string(Topology t);
Topology parse_topology(const std::string& s);  // "siso", "DIDO", ...
inline bool dual_in(Topology t) { return t == Topology::kDISO || t == Topology::kDIDO; }
inline bool dual_out(Topology t) { return t == Topology::kSIDO || t == Topology::kDIDO; }

/// A named stage of the reference layer table and the node holding its output.
struct Stage {
  std::string name;
  int node = -1;
};

template <typename T>
struct Network {
  ArchConfig arch;
  Topology topology = Topology::kSISO;
  nn::Graph<T> graph;
  std::vector<Stage> stages;  // table order; per-head stages carry a "/head" suffix
  int logit_node = -1;  // pre-sigmoid output of the first head
};

/// Builds encoder (Conv0, Res-layer1..4 without the initial max-pool),
/// decoder (Conv5, TransConv6 .. ConvBlock11 with skips from Res-layer3/2/1)
/// and one or two heads (TransConv12, ConvBlock13, Conv14, sigmoid). The
/// returned graph is shape-checked but not initialized.
template <typename T>
Network<T> build(const ArchConfig& arch, Topology topology, int batch = 1);

}  // namespace venibot::model
