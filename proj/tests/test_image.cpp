#include <doctest.h>

#include <filesystem>

#include "venibot/errors.hpp"
#include "venibot/image.hpp"

using namespace venibot;
namespace fs = std::filesystem;

TEST_SUITE("image") {
  TEST_CASE("png and pgm round trip at 8-bit precision") {
    GrayImage img(7, 5);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x) img.at(x, y) = (x * 5 + y) / 255.0;
    const auto dir = fs::temp_directory_path() / "venibot_image_test";
    fs::create_directories(dir);
    for (const char* ext : {".png", ".pgm"}) {
      const auto path = dir / (std::string("img") + ext);
      write_image(path, img);
      const auto back = read_image(path);
      REQUIRE(back.width() == 7);
      REQUIRE(back.height() == 5);
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) CHECK(back.at(x, y) == doctest::Approx(img.at(x, y)).epsilon(1e-12));
    }
    fs::remove_all(dir);
  }

  TEST_CASE("masks round trip") {
    BinaryMask m(4, 3);
    m.set(1, 1);
    m.set(3, 2);
    const auto path = fs::temp_directory_path() / "venibot_mask_test.png";
    write_mask(path, m);
    CHECK(read_mask(path) == m);
    fs::remove(path);
  }

  TEST_CASE("missing file is a data error") {
    CHECK_THROWS_AS(read_image("/nonexistent/venibot.png"), DataError);
  }

  TEST_CASE("flips are involutions and rotate180 is both flips") {
    BinaryMask m(5, 3);
    m.set(0, 0);
    m.set(4, 1);
    m.set(2, 2);
    CHECK(flip_horizontal(flip_horizontal(m)) == m);
    CHECK(flip_vertical(flip_vertical(m)) == m);
    CHECK(rotate180(m) == flip_vertical(flip_horizontal(m)));
    CHECK(flip_horizontal(m).at(4, 0));
  }

  TEST_CASE("set algebra on masks") {
    BinaryMask a(3, 1), b(3, 1);
    a.set(0, 0);
    a.set(1, 0);
    b.set(1, 0);
    b.set(2, 0);
    CHECK((a & b).count() == 1);
    CHECK((a | b).count() == 3);
    CHECK((a & b).subset_of(a));
    CHECK_FALSE(a.subset_of(b));
  }

  TEST_CASE("downsample2 halves each side") {
    GrayImage img(4, 2, 0.0);
    img.at(0, 0) = 1.0;
    const auto d = downsample2(img);
    CHECK(d.width() == 2);
    CHECK(d.height() == 1);
    CHECK(d.at(0, 0) == doctest::Approx(0.25));
  }
}
