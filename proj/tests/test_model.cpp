#include <doctest.h>

#include <cmath>

#include "support/layer_table.hpp"
#include "venibot/errors.hpp"
#include "venibot/model.hpp"

using namespace venibot;

TEST_SUITE("model") {
  TEST_CASE("full-scale stage sizes match the reference table") {
    const auto net = model::build<double>(model::ArchConfig::full_scale(), model::Topology::kSISO);
    REQUIRE(net.stages.size() == testing::kTableStages.size());
    for (std::size_t i = 0; i < net.stages.size(); ++i) {
      const auto& row = testing::kTableStages[i];
      const auto s = net.graph.node(net.stages[i].node).shape;
      INFO(row.name);
      CHECK(net.stages[i].name == row.name);
      CHECK(s.h == row.h);
      CHECK(s.w == row.w);
      CHECK(s.c == row.channels);
    }
  }

  TEST_CASE("full-scale parameter and operation counts") {
    const auto net = model::build<double>(model::ArchConfig::full_scale(), model::Topology::kSISO);
    const double params = static_cast<double>(net.graph.param_count());
    CHECK(std::abs(params / testing::kTableParams - 1.0) < 0.02);
    const double flops = static_cast<double>(net.graph.flops(nn::FlopConvention::kTorchstat));
    CHECK(std::abs(flops / testing::kTableFlops - 1.0) < 0.10);
    // The textbook count (2 per MAC, transposed convolutions included) is
    // about three times larger; see the README for the reconciliation.
    CHECK(net.graph.flops(nn::FlopConvention::kFormula) > 3 * testing::kTableFlops);
  }

  TEST_CASE("desk scale divides every width by eight") {
    const auto net = model::build<double>(model::ArchConfig::desk_scale(), model::Topology::kSISO);
    const auto full = model::build<double>(model::ArchConfig::full_scale(), model::Topology::kSISO);
    for (std::size_t i = 0; i + 1 < net.stages.size(); ++i) {
      const auto a = net.graph.node(net.stages[i].node).shape, b = full.graph.node(full.stages[i].node).shape;
      CHECK(a.c * 8 == b.c);
      // Odd sizes round up, so halving the input can leave one extra column.
      CHECK((b.h + 1) / 2 == a.h);
      CHECK((b.w + 1) / 2 == a.w);
    }
  }

  TEST_CASE("topologies") {
    const auto arch = model::ArchConfig::desk_scale();
    for (auto t : {model::Topology::kSISO, model::Topology::kSIDO, model::Topology::kDISO, model::Topology::kDIDO}) {
      const auto net = model::build<double>(arch, t, 2);
      CHECK(net.graph.node(net.graph.inputs()[0]).shape.c == (model::dual_in(t) ? 2 : 1));
      CHECK(net.graph.outputs().size() == (model::dual_out(t) ? 2u : 1u));
      for (int o : net.graph.outputs()) {
        const auto s = net.graph.node(o).shape;
        CHECK(s == nn::Shape{2, 1, 64, 104});
      }
    }
    CHECK(model::parse_topology("dido") == model::Topology::kDIDO);
    CHECK_THROWS_AS(model::parse_topology("xyz"), ConfigError);
  }

  TEST_CASE("indivisible widths are a config error") {
    auto a = model::ArchConfig::desk_scale();
    a.cardinality = 3;
    CHECK_THROWS_AS(a.validate(), ConfigError);
    a = model::ArchConfig::desk_scale();
    a.width_divisor = 7;
    CHECK_THROWS_AS(model::build<double>(a, model::Topology::kSISO), ConfigError);
    a = model::ArchConfig::desk_scale();
    a.height = 12;
    CHECK_THROWS_AS(a.validate(), ConfigError);
  }

  TEST_CASE("building is pure shape work") {
    const auto net = model::build<double>(model::ArchConfig::full_scale(), model::Topology::kDIDO);
    CHECK_FALSE(net.graph.initialized());
    CHECK(net.graph.param_count() > 0);
  }

  TEST_CASE("same seed, same initial weights; heads do not disturb the trunk") {
    auto a = model::build<double>(model::ArchConfig::desk_scale(), model::Topology::kSISO);
    auto b = model::build<double>(model::ArchConfig::desk_scale(), model::Topology::kSIDO);
    a.graph.initialize(4);
    b.graph.initialize(4);
    const auto ta = a.graph.named_tensors(), tb = b.graph.named_tensors();
    CHECK(*ta[0].second == *tb[0].second);
  }
}
