#include <doctest.h>

#include "venibot/augment.hpp"
#include "venibot/errors.hpp"
#include "venibot/geometry.hpp"

using namespace venibot;

namespace {

synth::SyntheticSample sample(std::uint64_t seed) {
  synth::VeinTreeSpec spec;
  spec.seed = seed;
  return synth::generate_sample(spec);
}

}  // namespace

TEST_SUITE("augment") {
  TEST_CASE("identity draw leaves the sample untouched") {
    const auto s = sample(5);
    const auto a = augment::apply(augment::TransformDraw::identity(208, 128), s);
    CHECK(a.vein == s.vein_gt);
    CHECK(a.suitable == s.suitable_gt);
    CHECK(a.targets.size() == s.targets.size());
    for (std::size_t i = 0; i < a.targets.size(); ++i)
      CHECK(a.targets[i].phi_deg == doctest::Approx(s.targets[i].phi_deg));
  }

  TEST_CASE("analytic angle transform") {
    auto t = augment::TransformDraw::identity(208, 128);
    t.hflip = true;
    CHECK(augment::transform_phi(30.0, t) == doctest::Approx(-30.0));
    t = augment::TransformDraw::identity(208, 128);
    t.vflip = true;
    CHECK(augment::transform_phi(30.0, t) == doctest::Approx(-30.0));
    t = augment::TransformDraw::identity(208, 128);
    t.rotation_deg = 20.0;
    CHECK(augment::transform_phi(80.0, t) == doctest::Approx(-80.0));
    // Anisotropic resize: doubling x halves the slope.
    t = augment::TransformDraw::identity(100, 100);
    t.out_width = 200;
    CHECK(augment::transform_phi(45.0, t) == doctest::Approx(26.565051).epsilon(1e-6));
  }

  TEST_CASE("draws stay inside the policy ranges") {
    augment::AugmentPolicy p;
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
      const auto d = augment::draw_transform(p, rng, 208, 128);
      CHECK(d.crop_w * d.crop_h >= 0.2 * 208 * 128 - 1e-6);
      CHECK(d.crop_x >= 0.0);
      CHECK(d.crop_y >= 0.0);
      CHECK(d.crop_x + d.crop_w <= 208.0 + 1e-9);
      CHECK(d.crop_y + d.crop_h <= 128.0 + 1e-9);
      CHECK(std::abs(d.rotation_deg) <= 45.0);
      CHECK(d.brightness >= 0.8);
      CHECK(d.brightness <= 1.2);
    }
  }

  TEST_CASE("augmenter streams are reproducible") {
    const auto s = sample(6);
    augment::AugmentPolicy p;
    p.seed = 17;
    augment::Augmenter a(p), b(p);
    for (int i = 0; i < 3; ++i) {
      const auto x = a.next(s), y = b.next(s);
      CHECK(x.image == y.image);
      CHECK(x.suitable == y.suitable);
    }
    CHECK(a.draws() == 3);
  }

  TEST_CASE("saturation is a no-op on single-channel images") {
    GrayImage img(4, 4, 0.3);
    img.at(1, 1) = 0.9;
    CHECK(augment::intensity_jitter(img, 1.0, 1.0, 1.7) == img);
  }

  TEST_CASE("intensity jitter stays in [0,1]") {
    GrayImage img(3, 3, 0.95);
    for (double v : augment::intensity_jitter(img, 1.2, 1.2, 1.0).pixels()) CHECK(v <= 1.0);
  }

  TEST_CASE("invalid policy") {
    augment::AugmentPolicy p;
    p.p_hflip = -0.1;
    CHECK_THROWS_AS(p.validate(), ParameterError);
  }
}
