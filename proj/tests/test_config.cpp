#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "venibot/config.hpp"
#include "venibot/errors.hpp"

using namespace venibot;
namespace fs = std::filesystem;

TEST_SUITE("config") {
  TEST_CASE("defaults are the reference recipe") {
    const auto c = config::parse_run_config("{}");
    CHECK(c.train.batch_size == 2);
    CHECK(c.train.lr == 1e-3);
    CHECK(c.train.weight_decay == 1e-5);
    CHECK(c.train.iterations == 1575);
    CHECK(c.train.plateau_factor == 0.5);
    CHECK(c.train.plateau_patience == 5);
    CHECK(c.train.policy.rotation_deg.hi == 45.0);
    CHECK(c.volunteers * c.images_per_volunteer == 900);
    CHECK(c.arch == model::ArchConfig::desk_scale());
    CHECK(c.folds == 5);
  }

  TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(config::parse_run_config(R"({"trian": {}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"train": {"learning_rate": 1}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"synth": {"rules": {"foo": 1}}})"), ConfigError);
  }

  TEST_CASE("malformed values are config errors") {
    CHECK_THROWS_AS(config::parse_run_config("{not json"), ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"train": {"lr": "fast"}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"train": {"batch_size": 0}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"augment": {"rotation_deg": [1]}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"topology": "unet"})"), ConfigError);
  }

  TEST_CASE("dump and parse round trip") {
    auto c = config::parse_run_config(R"({"train": {"iterations": 10, "seed": 5}, "topology": "SIDO",
                                         "calibration": {"rotation_deg": 12.5}})",
                                      "/base");
    const auto text = config::dump_run_config(c, "/base");
    const auto d = config::parse_run_config(text, "/base");
    CHECK(config::dump_run_config(d, "/base") == text);
    CHECK(d.train.iterations == 10);
    CHECK(d.topology == model::Topology::kSIDO);
    CHECK(d.calibration.rotation_deg == 12.5);
  }

  TEST_CASE("relative paths resolve against the config file") {
    const auto dir = fs::temp_directory_path() / "venibot_cfg_test";
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "run.json");
      out << R"({"manifest": "corpus/manifest.json", "output_dir": "/abs/out"})";
    }
    const auto c = config::load_run_config(dir / "run.json");
    CHECK(c.manifest == dir / "corpus/manifest.json");
    CHECK(c.output_dir == fs::path("/abs/out"));
    fs::remove_all(dir);
  }

  TEST_CASE("the shipped default config parses and equals the built-in defaults") {
    const fs::path shipped = fs::path(VENIBOT_SOURCE_DIR) / "config" / "default.json";
    const auto c = config::load_run_config(shipped);
    std::ifstream in(shipped);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(config::dump_run_config(c, shipped.parent_path()) == ss.str());
    const auto d = config::parse_run_config("{}", shipped.parent_path());
    CHECK(config::dump_run_config(d, shipped.parent_path()) == ss.str());
  }
}
