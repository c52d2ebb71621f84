#include "venibot/train.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json_io.hpp"
#include "venibot/errors.hpp"
#include "venibot/metrics.hpp"
#include "venibot/nn/loss.hpp"
#include "venibot/nn/optim.hpp"
#include "venibot/vision.hpp"

namespace venibot::train {

void TrainConfig::validate() const {
  if (batch_size <= 0) throw ConfigError("train: batch_size must be > 0");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (iterations <= 0) throw ConfigError("train: iterations must be > 0");
  if (val_interval < 0 || val_interval > iterations)
    throw ConfigError("train: val_interval must lie in [0, iterations]");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("train: plateau_factor must lie in (0,1)");
  if (plateau_patience < 0) throw ConfigError("train: plateau_patience must be >= 0");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("train: threshold must lie in (0,1]");
  policy.validate();
}

int TrainConfig::interval_for(int step, model::Topology topology) const {
  if (val_interval > 0) return val_interval;
  const int auto_interval = (step == 2 && model::dual_in(topology)) ? 20 : 50;
  return std::min(auto_interval, iterations);
}

namespace {

double window_mean(const std::vector<double>& v, bool head) {
  if (v.empty()) return 0.0;
  const std::size_t k = std::max<std::size_t>(1, std::min<std::size_t>(20, v.size() / 5));
  const auto first = head ? v.begin() : v.end() - static_cast<std::ptrdiff_t>(k);
  return std::accumulate(first, first + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

}  // namespace

double History::initial_loss() const { return window_mean(iteration_loss, true); }
double History::final_loss() const { return window_mean(iteration_loss, false); }
bool History::converged() const { return !iteration_loss.empty() && final_loss() <= 0.5 * initial_loss(); }

void write_history_csv(const History& h, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "iteration,loss,val_metric,lr\n";
  char line[160];
  for (const auto& r : h.rows) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g\n", r.iteration, r.loss, r.val_metric, r.lr);
    os << line;
  }
}

Example fit_to(const synth::SyntheticSample& sample, int width, int height) {
  auto t = augment::TransformDraw::identity(sample.image.width(), sample.image.height());
  t.out_width = width;
  t.out_height = height;
  return augment::apply(t, sample);
}

template <typename T>
Batch<T> make_batch(const std::vector<const Example*>& examples) {
  if (examples.empty()) throw DataError("make_batch: no examples");
  const int w = examples[0]->image.width(), h = examples[0]->image.height();
  const nn::Shape s{static_cast<int>(examples.size()), 1, h, w};
  Batch<T> b{nn::Tensor<T>(s), nn::Tensor<T>(s), nn::Tensor<T>(s), nn::Tensor<T>(s), nn::Tensor<T>(s)};
  for (int n = 0; n < s.n; ++n) {
    const Example& e = *examples[n];
    if (e.image.width() != w || e.image.height() != h) throw DataError("make_batch: examples differ in size");
    const auto px = e.image.pixels();
    const auto vein = e.vein.bits();
    const auto suit = e.suitable.bits();
    const std::size_t off = static_cast<std::size_t>(n) * s.plane();
    for (std::size_t i = 0; i < s.plane(); ++i) {
      b.image[off + i] = static_cast<T>(px[i]);
      b.vein[off + i] = vein[i] ? T(1) : T(0);
      b.area[off + i] = suit[i] ? T(1) : T(0);
      const int label = e.target_labels.empty() ? 0 : e.target_labels[i];
      if (label > 0 && suit[i]) {
        b.angle[off + i] = static_cast<T>((e.targets[label - 1].phi_deg + 90.0) / 180.0);
        b.angle_mask[off + i] = T(1);
      }
    }
  }
  return b;
}

template <typename T>
nn::Tensor<T> dual_input(model::Network<T>& step1, const nn::Tensor<T>& image) {
  step1.graph.set_training(false);
  step1.graph.forward({image});
  const auto& logits = step1.graph.value(step1.logit_node);
  const nn::Shape s = image.shape();
  nn::Tensor<T> out({s.n, 2, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(image.plane(n, 0), s.plane(), out.plane(n, 0));
    const T* l = logits.plane(n, 0);
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < s.plane(); ++i) mean += l[i];
    mean /= static_cast<double>(s.plane());
    for (std::size_t i = 0; i < s.plane(); ++i) sq += (l[i] - mean) * (l[i] - mean);
    const double sd = std::max(std::sqrt(sq / static_cast<double>(s.plane())), 1e-6);
    T* o = out.plane(n, 1);
    for (std::size_t i = 0; i < s.plane(); ++i) o[i] = static_cast<T>((l[i] - mean) / sd);
  }
  return out;
}

namespace {

// Draws training batches: an epoch-wise shuffled order over the samples, each
// example augmented with a seed derived from its position in the stream.
class BatchStream {
 public:
  BatchStream(const std::vector<synth::SyntheticSample>& samples, const model::ArchConfig& arch,
              const TrainConfig& cfg, bool augment, std::uint64_t seed)
      : samples_(samples), arch_(arch), batch_(cfg.batch_size), augment_(augment), seed_(seed),
        order_rng_(derive_seed(seed, 0x6f72646572ULL)), policy_(cfg.policy) {
    policy_.out_width = arch.width;
    policy_.out_height = arch.height;
    order_.resize(samples.size());
  }

  std::vector<Example> next() {
    std::vector<Example> out;
    for (int slot = 0; slot < batch_; ++slot) {
      if (pos_ == order_.size() || drawn_ == 0) refill();
      const auto& sample = samples_[order_[pos_++]];
      if (augment_) {
        Rng rng(derive_seed(seed_, drawn_));
        out.push_back(augment::apply(policy_, sample, rng));
      } else {
        out.push_back(fit_to(sample, arch_.width, arch_.height));
      }
      ++drawn_;
    }
    return out;
  }

 private:
  void refill() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    order_rng_.shuffle(order_.begin(), order_.end());
    pos_ = 0;
  }

  const std::vector<synth::SyntheticSample>& samples_;
  const model::ArchConfig& arch_;
  int batch_;
  bool augment_;
  std::uint64_t seed_;
  Rng order_rng_;
  augment::AugmentPolicy policy_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::uint64_t drawn_ = 0;
};

std::vector<const Example*> pointers(const std::vector<Example>& v, std::size_t first, std::size_t count) {
  std::vector<const Example*> out;
  for (std::size_t i = first; i < std::min(v.size(), first + count); ++i) out.push_back(&v[i]);
  return out;
}

template <typename T>
std::vector<nn::Tensor<T>> snapshot(nn::Graph<T>& g) {
  std::vector<nn::Tensor<T>> out;
  for (auto& [name, t] : g.named_tensors()) out.push_back(*t);
  return out;
}

template <typename T>
void restore(nn::Graph<T>& g, const std::vector<nn::Tensor<T>>& state) {
  auto tensors = g.named_tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i].second = state[i];
}

BinaryMask threshold_plane(const double* v, int w, int h, double threshold) {
  BinaryMask m(w, h);
  if (threshold >= 1.0) return m;
  auto bits = m.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = v[i] >= threshold ? 1 : 0;
  return m;
}

template <typename T>
BinaryMask threshold_plane(const nn::Tensor<T>& t, int n, double threshold) {
  const nn::Shape s = t.shape();
  std::vector<double> v(t.plane(n, 0), t.plane(n, 0) + s.plane());
  return threshold_plane(v.data(), s.w, s.h, threshold);
}

void log_row(int step, const HistoryRow& r, const char* metric) {
  spdlog::info("step {} iter {:5d}  loss {:.5f}  val {} {:.5f}  lr {:.2e}", step, r.iteration, r.loss, metric,
               r.val_metric, r.lr);
}

// Shared loop of both steps: `loss_fn` runs forward/backward on one batch and
// returns the loss; `val_fn` returns the validation metric.
template <typename T, typename LossFn, typename ValFn>
History optimise(model::Network<T>& net, int step, const TrainConfig& cfg, nn::PlateauMode mode,
                 BatchStream& stream, LossFn&& loss_fn, ValFn&& val_fn) {
  auto& g = net.graph;
  if (!g.initialized()) throw StateError("training an uninitialized network");
  nn::Adam<T> opt(g.parameters(), nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  nn::PlateauScheduler sched(mode, cfg.plateau_factor, cfg.plateau_patience);
  const int interval = cfg.interval_for(step, net.topology);
  History h;
  h.best_metric = mode == nn::PlateauMode::kMax ? -1e300 : 1e300;
  auto best = snapshot(g);
  double since = 0.0;
  int since_count = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto examples = stream.next();
    const auto batch = make_batch<T>(pointers(examples, 0, examples.size()));
    g.set_training(true);
    opt.zero_grad();
    const double loss = loss_fn(batch);
    opt.step();
    h.iteration_loss.push_back(loss);
    since += loss;
    ++since_count;
    if (it % interval == 0 || it == cfg.iterations) {
      g.set_training(false);
      const double metric = val_fn();
      const double lr = sched.step(metric, opt.lr());
      opt.set_lr(lr);
      h.rows.push_back({it, since / since_count, metric, lr});
      log_row(step, h.rows.back(), mode == nn::PlateauMode::kMax ? "dsc" : "mse");
      since = 0.0;
      since_count = 0;
      const bool better = mode == nn::PlateauMode::kMax ? metric > h.best_metric : metric < h.best_metric;
      if (better) {
        h.best_metric = metric;
        h.best_iteration = it;
        best = snapshot(g);
      }
    }
  }
  restore(g, best);
  g.set_training(false);
  return h;
}

}  // namespace

template <typename T>
History train_step1(model::Network<T>& net, const std::vector<synth::SyntheticSample>& train,
                    const std::vector<synth::SyntheticSample>& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw DataError("step 1: empty training set");
  if (val.empty()) throw DataError("step 1: empty validation set");
  if (net.topology != model::Topology::kSISO) throw ConfigError("step 1 trains a SISO network");
  std::vector<Example> val_ex;
  for (const auto& s : val) val_ex.push_back(fit_to(s, net.arch.width, net.arch.height));
  BatchStream stream(train, net.arch, cfg, cfg.augment_step1, derive_seed(cfg.seed, 1));
  auto& g = net.graph;

  auto loss_fn = [&](const Batch<T>& b) {
    const auto out = g.forward({b.image});
    auto r = nn::bce_loss(out[0], b.vein);
    g.backward({r.grad});
    return r.value;
  };
  auto val_fn = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < val_ex.size(); i += cfg.batch_size) {
      const auto b = make_batch<T>(pointers(val_ex, i, cfg.batch_size));
      const auto out = g.forward({b.image});
      for (int n = 0; n < b.image.shape().n; ++n)
        sum += metrics::dsc(threshold_plane(out[0], n, 0.5), val_ex[i + n].vein);
    }
    return sum / static_cast<double>(val_ex.size());
  };
  return optimise(net, 1, cfg, nn::PlateauMode::kMax, stream, loss_fn, val_fn);
}

template <typename T>
History train_step2(model::Network<T>& net, model::Network<T>* step1,
                    const std::vector<synth::SyntheticSample>& train,
                    const std::vector<synth::SyntheticSample>& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw DataError("step 2: empty training set");
  if (val.empty()) throw DataError("step 2: empty validation set");
  const bool two_in = model::dual_in(net.topology);
  const bool two_out = model::dual_out(net.topology);
  if (two_in && !step1) throw StateError(model::to_string(net.topology) + " needs a trained step-1 network");
  if (two_in && !(step1->arch == net.arch)) throw ConfigError("step-1 and step-2 architectures differ");
  const std::uint64_t frozen = two_in ? parameter_hash(step1->graph) : 0;

  std::vector<Example> val_ex;
  for (const auto& s : val) val_ex.push_back(fit_to(s, net.arch.width, net.arch.height));
  BatchStream stream(train, net.arch, cfg, cfg.augment_step2, derive_seed(cfg.seed, 2));
  auto& g = net.graph;
  auto input = [&](const Batch<T>& b) { return two_in ? dual_input(*step1, b.image) : b.image; };
  int empty_masks = 0;

  // Area L2 plus, for two heads, the angle L2 over suitable pixels.
  auto losses = [&](const Batch<T>& b, bool backprop) {
    const auto out = g.forward({input(b)});
    auto area = nn::l2_loss(out[0], b.area);
    double total = area.value;
    std::vector<nn::Tensor<T>> grads{std::move(area.grad)};
    if (two_out) {
      auto angle = nn::l2_loss(out[1], b.angle, &b.angle_mask);
      if (angle.empty_mask) ++empty_masks;
      total += angle.value;
      grads.push_back(std::move(angle.grad));
    }
    if (backprop) g.backward(grads);
    return total;
  };
  auto loss_fn = [&](const Batch<T>& b) { return losses(b, true); };
  auto val_fn = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < val_ex.size(); i += cfg.batch_size) {
      const auto b = make_batch<T>(pointers(val_ex, i, cfg.batch_size));
      sum += losses(b, false) * b.image.shape().n;
    }
    return sum / static_cast<double>(val_ex.size());
  };
  auto h = optimise(net, 2, cfg, nn::PlateauMode::kMin, stream, loss_fn, val_fn);
  if (empty_masks > 0)
    spdlog::warn("step 2: {} batches had no suitable pixels; their angle loss was defined as 0", empty_masks);
  if (two_in && parameter_hash(step1->graph) != frozen)
    throw StateError("step-1 parameters changed during step-2 training");
  return h;
}

template <typename T>
Pipeline<T> train_pipeline(model::Topology topology, const model::ArchConfig& arch,
                           const std::vector<synth::SyntheticSample>& train,
                           const std::vector<synth::SyntheticSample>& val, const TrainConfig& cfg) {
  Pipeline<T> p;
  p.topology = topology;
  p.threshold = cfg.threshold;
  if (model::dual_in(topology)) {
    p.step1.emplace(model::build<T>(arch, model::Topology::kSISO, cfg.batch_size));
    p.step1->graph.initialize(derive_seed(cfg.seed, 101));
    p.history1 = train_step1(*p.step1, train, val, cfg);
  }
  p.step2.emplace(model::build<T>(arch, topology, cfg.batch_size));
  p.step2->graph.initialize(derive_seed(cfg.seed, 102));
  p.history2 = train_step2(*p.step2, p.step1 ? &*p.step1 : nullptr, train, val, cfg);
  return p;
}

Prediction decode(GrayImage area, std::optional<GrayImage> angle, double threshold) {
  Prediction p;
  const int w = area.width(), h = area.height();
  if (angle && (angle->width() != w || angle->height() != h)) throw DataError("decode: map sizes differ");
  p.mask = threshold_plane(area.pixels().data(), w, h, threshold);
  const auto cs = vision::connected_components(p.mask);
  p.labels = cs.labels;
  for (const auto& st : cs.stats) {
    geometry::PunctureTarget t;
    t.component = st.id;
    t.cx = st.cx;
    t.cy = st.cy;
    if (angle) {
      double sum = 0.0;
      for (int y = st.min_y; y <= st.max_y; ++y)
        for (int x = st.min_x; x <= st.max_x; ++x)
          if (cs.label(x, y) == st.id) sum += angle->at(x, y);
      t.phi_deg = geometry::wrap_axis_deg(180.0 * sum / st.area - 90.0);
    } else {
      try {
        t = geometry::continuous_angle(geometry::fit_component_angle(cs, st.id), cs, st.id);
      } catch (const FitError&) {
        // Too small or round to carry an orientation; 0 keeps the target list
        // aligned with the components.
        t.phi_deg = 0.0;
      }
    }
    t.theta_deg = std::abs(t.phi_deg);
    p.targets.push_back(t);
  }
  p.area = std::move(area);
  p.angle = std::move(angle);
  return p;
}

template <typename T>
Prediction infer(Pipeline<T>& pipeline, const GrayImage& image) {
  if (!pipeline.step2) throw StateError("infer: pipeline has no trained step-2 network");
  auto& net = *pipeline.step2;
  if (image.width() != net.arch.width || image.height() != net.arch.height)
    throw DataError("infer: image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    ", the network expects " + std::to_string(net.arch.width) + "x" +
                    std::to_string(net.arch.height));
  nn::Tensor<T> x({1, 1, image.height(), image.width()});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(image.pixels()[i]);
  if (model::dual_in(net.topology)) {
    if (!pipeline.step1) throw StateError("infer: dual-input pipeline has no step-1 network");
    x = dual_input(*pipeline.step1, x);
  }
  net.graph.set_training(false);
  const auto out = net.graph.forward({x});
  auto to_image = [&](const nn::Tensor<T>& t) {
    std::vector<double> v(t.values().begin(), t.values().end());
    return GrayImage(image.width(), image.height(), std::move(v));
  };
  std::optional<GrayImage> angle;
  if (out.size() > 1) angle = to_image(out[1]);
  return decode(to_image(out[0]), std::move(angle), pipeline.threshold);
}

template <typename T>
std::uint64_t parameter_hash(nn::Graph<T>& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto& [name, t] : g.named_tensors()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t->data());
    for (std::size_t i = 0; i < t->size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

template <typename T>
std::vector<nn::StoredTensor> export_network(model::Network<T>& net) {
  auto header = json_io::to_json(net.arch);
  header["topology"] = model::to_string(net.topology);
  std::vector<nn::StoredTensor> out{nn::StoredTensor::text("__arch__", header.dump())};
  for (auto& r : nn::export_graph(net.graph)) out.push_back(std::move(r));
  return out;
}

template <typename T>
model::Network<T> import_network(const std::vector<nn::StoredTensor>& records) {
  const auto* header = nn::find_record(records, "__arch__");
  if (!header) throw DataError("checkpoint has no architecture header");
  json_io::ordered_json j;
  try {
    j = json_io::ordered_json::parse(header->as_string());
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint architecture header is not valid JSON: ") + e.what());
  }
  const auto topology = model::parse_topology(j.value("topology", "SISO"));
  j.erase("topology");
  auto net = model::build<T>(json_io::arch_from_json(j, "checkpoint arch"), topology);
  net.graph.initialize(0);
  nn::import_graph(net.graph, records);
  net.graph.set_training(false);
  return net;
}

#define VENIBOT_TRAIN_INSTANTIATE(T)                                                                          \
  template Batch<T> make_batch<T>(const std::vector<const Example*>&);                                        \
  template nn::Tensor<T> dual_input<T>(model::Network<T>&, const nn::Tensor<T>&);                             \
  template History train_step1<T>(model::Network<T>&, const std::vector<synth::SyntheticSample>&,             \
                                  const std::vector<synth::SyntheticSample>&, const TrainConfig&);            \
  template History train_step2<T>(model::Network<T>&, model::Network<T>*,                                     \
                                  const std::vector<synth::SyntheticSample>&,                                 \
                                  const std::vector<synth::SyntheticSample>&, const TrainConfig&);            \
  template Pipeline<T> train_pipeline<T>(model::Topology, const model::ArchConfig&,                           \
                                         const std::vector<synth::SyntheticSample>&,                          \
                                         const std::vector<synth::SyntheticSample>&, const TrainConfig&);     \
  template Prediction infer<T>(Pipeline<T>&, const GrayImage&);                                               \
  template std::uint64_t parameter_hash<T>(nn::Graph<T>&);                                                    \
  template std::vector<nn::StoredTensor> export_network<T>(model::Network<T>&);                               \
  template model::Network<T> import_network<T>(const std::vector<nn::StoredTensor>&);

VENIBOT_TRAIN_INSTANTIATE(float)
VENIBOT_TRAIN_INSTANTIATE(double)

}  // namespace venibot::train
