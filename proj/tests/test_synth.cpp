#include <doctest.h>

#include <filesystem>

#include "venibot/errors.hpp"
#include "venibot/synth.hpp"

using namespace venibot;
namespace fs = std::filesystem;

TEST_SUITE("synth") {
  TEST_CASE("same seed, same sample") {
    synth::VeinTreeSpec spec;
    spec.seed = 3;
    const auto a = synth::generate_sample(spec);
    const auto b = synth::generate_sample(spec);
    CHECK(a.image == b.image);
    CHECK(a.vein_gt == b.vein_gt);
    CHECK(a.suitable_gt == b.suitable_gt);
    spec.seed = 4;
    CHECK_FALSE(synth::generate_sample(spec).image == a.image);
  }

  TEST_CASE("ground truth is consistent") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      synth::VeinTreeSpec spec;
      spec.seed = seed;
      const auto s = synth::generate_sample(spec);
      CHECK(s.image.width() == 208);
      CHECK(s.image.height() == 128);
      CHECK(s.vein_gt.any());
      CHECK(s.suitable_gt.subset_of(s.vein_gt));
      for (double v : s.image.pixels()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      for (const auto& t : s.targets) {
        CHECK(t.phi_deg > -90.0);
        CHECK(t.phi_deg <= 90.0);
        CHECK(t.length_px >= spec.rules.min_length_px);
      }
      for (std::size_t i = 0; i < s.target_labels.size(); ++i)
        CHECK((s.target_labels[i] > 0) == (s.suitable_gt.bits()[i] != 0));
    }
  }

  TEST_CASE("noise-free samples carry no hair or blemishes") {
    synth::VeinTreeSpec spec;
    spec.seed = 8;
    const auto s = synth::generate_sample(spec.noise_free());
    CHECK_FALSE(s.hair_mask.any());
    CHECK_FALSE(s.blemish_mask.any());
  }

  TEST_CASE("noise layers never alter ground truth") {
    synth::VeinTreeSpec spec;
    spec.seed = 21;
    const auto noisy = synth::generate_sample(spec);
    const auto clean = synth::generate_sample(spec.noise_free());
    CHECK(noisy.vein_gt == clean.vein_gt);
    CHECK(noisy.suitable_gt == clean.suitable_gt);
  }

  TEST_CASE("a fixed trunk angle is honoured") {
    synth::VeinTreeSpec spec = synth::VeinTreeSpec{}.noise_free();
    spec.seed = 2;
    spec.trunk_count = 1;
    spec.bifurcation_prob = 0.0;
    spec.curvature_deg_per_px = {0.0, 0.0};
    spec.trunk_angle_deg = 20.0;
    const auto s = synth::generate_sample(spec);
    REQUIRE(!s.targets.empty());
    CHECK(s.targets[0].phi_deg == doctest::Approx(20.0).epsilon(0.05));
  }

  TEST_CASE("invalid specs are rejected") {
    synth::VeinTreeSpec spec;
    spec.bifurcation_prob = 1.5;
    CHECK_THROWS_AS(spec.validate(), ParameterError);
    spec = {};
    spec.width = 0;
    CHECK_THROWS_AS(spec.validate(), ParameterError);
  }

  TEST_CASE("corpus generation writes a manifest that reads back") {
    const auto dir = fs::temp_directory_path() / "venibot_corpus_test";
    fs::remove_all(dir);
    synth::VeinTreeSpec spec;
    spec.seed = 77;
    const auto m = synth::generate_corpus(spec, 2, 3, dir);
    CHECK(m.samples.size() == 6);
    const auto back = synth::read_manifest(dir / "manifest.json");
    CHECK(back.samples.size() == 6);
    CHECK(back.volunteers() == std::vector<int>{0, 1});
    const auto s = synth::load_sample(back, back.samples[4]);
    CHECK(s.vein_gt.any());
    CHECK(s.targets.size() == back.samples[4].targets.size());
    fs::remove_all(dir);
  }
}
