#include <doctest.h>

#include <filesystem>

#include "venibot/errors.hpp"
#include "venibot/nn/checkpoint.hpp"
#include "venibot/train.hpp"

using namespace venibot;

namespace {

std::vector<synth::SyntheticSample> corpus(std::uint64_t seed, int n) {
  std::vector<synth::SyntheticSample> out;
  for (int i = 0; i < n; ++i) {
    synth::VeinTreeSpec spec;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    out.push_back(synth::generate_sample(spec));
  }
  return out;
}

train::TrainConfig tiny_config() {
  train::TrainConfig cfg;
  cfg.iterations = 4;
  cfg.val_interval = 2;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("config validation and validation intervals") {
    train::TrainConfig cfg;
    CHECK(cfg.interval_for(1, model::Topology::kDIDO) == 50);
    CHECK(cfg.interval_for(2, model::Topology::kSISO) == 50);
    CHECK(cfg.interval_for(2, model::Topology::kDIDO) == 20);
    cfg.val_interval = 7;
    CHECK(cfg.interval_for(2, model::Topology::kDIDO) == 7);
    cfg.lr = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("history loss windows") {
    train::History h;
    for (int i = 0; i < 100; ++i) h.iteration_loss.push_back(i < 20 ? 1.0 : (i >= 80 ? 0.25 : 0.5));
    CHECK(h.initial_loss() == 1.0);
    CHECK(h.final_loss() == 0.25);
    CHECK(h.converged());
  }

  TEST_CASE("batches carry scaled angle targets on suitable pixels only") {
    const auto data = corpus(1, 2);
    const auto a = train::fit_to(data[0], 104, 64), b = train::fit_to(data[1], 104, 64);
    const auto batch = train::make_batch<double>({&a, &b});
    CHECK(batch.image.shape() == nn::Shape{2, 1, 64, 104});
    for (std::size_t i = 0; i < batch.angle.size(); ++i) {
      if (batch.angle_mask[i] == 0.0) CHECK(batch.angle[i] == 0.0);
      CHECK(batch.angle_mask[i] == batch.area[i]);
      CHECK(batch.angle[i] >= 0.0);
      CHECK(batch.angle[i] <= 1.0);
    }
  }

  TEST_CASE("training is deterministic and leaves step 1 untouched") {
    const auto train_set = corpus(2, 4), val = corpus(3, 2);
    const auto cfg = tiny_config();
    auto p = train::train_pipeline<double>(model::Topology::kDIDO, model::ArchConfig::desk_scale(), train_set, val, cfg);
    auto q = train::train_pipeline<double>(model::Topology::kDIDO, model::ArchConfig::desk_scale(), train_set, val, cfg);
    CHECK(train::parameter_hash(p.step1->graph) == train::parameter_hash(q.step1->graph));
    CHECK(train::parameter_hash(p.step2->graph) == train::parameter_hash(q.step2->graph));
    CHECK(p.history1.iteration_loss.size() == 4);
    CHECK(p.history2.rows.size() == 2);
    for (double l : p.history2.iteration_loss) CHECK(std::isfinite(l));

    const auto before = train::parameter_hash(p.step1->graph);
    auto net = model::build<double>(model::ArchConfig::desk_scale(), model::Topology::kDISO, cfg.batch_size);
    net.graph.initialize(1);
    train::train_step2(net, &*p.step1, train_set, val, cfg);
    CHECK(train::parameter_hash(p.step1->graph) == before);
  }

  TEST_CASE("dual-input step 2 needs a step-1 net") {
    const auto data = corpus(4, 2);
    auto net = model::build<double>(model::ArchConfig::desk_scale(), model::Topology::kDIDO, 2);
    net.graph.initialize(1);
    CHECK_THROWS_AS(train::train_step2(net, static_cast<model::Network<double>*>(nullptr), data, data, tiny_config()), StateError);
  }

  TEST_CASE("checkpoint round trip reproduces inference") {
    const auto train_set = corpus(5, 2);
    auto cfg = tiny_config();
    cfg.iterations = 2;
    auto p = train::train_pipeline<double>(model::Topology::kSIDO, model::ArchConfig::desk_scale(), train_set,
                                           train_set, cfg);
    const auto path = std::filesystem::temp_directory_path() / "venibot_train_ckpt.vbnn";
    nn::save_checkpoint(path, train::export_network(*p.step2));
    train::Pipeline<double> q;
    q.topology = model::Topology::kSIDO;
    q.step2.emplace(train::import_network<double>(nn::load_checkpoint(path)));
    CHECK(q.step2->topology == model::Topology::kSIDO);
    const auto ex = train::fit_to(train_set[0], 104, 64);
    const auto a = train::infer(p, ex.image), b = train::infer(q, ex.image);
    CHECK(a.area == b.area);
    CHECK(a.angle == b.angle);
    std::filesystem::remove(path);
  }

  TEST_CASE("single precision trains too") {
    const auto data = corpus(6, 2);
    auto cfg = tiny_config();
    cfg.iterations = 2;
    auto p = train::train_pipeline<float>(model::Topology::kSISO, model::ArchConfig::desk_scale(), data, data, cfg);
    for (double l : p.history2.iteration_loss) CHECK(std::isfinite(l));
  }

  TEST_CASE("inference rejects wrongly sized images") {
    train::Pipeline<double> p;
    CHECK_THROWS_AS(train::infer(p, GrayImage(104, 64)), StateError);
    p.step2.emplace(model::build<double>(model::ArchConfig::desk_scale(), model::Topology::kSISO));
    p.step2->graph.initialize(1);
    CHECK_THROWS_AS(train::infer(p, GrayImage(100, 64)), DataError);
  }
}
