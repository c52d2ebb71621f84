// venibot: command-line entry point for corpus generation, labeling,
// training, evaluation, inference and positioning.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 workspace error.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <optional>
#include <set>
#include <sstream>

#include "venibot/config.hpp"
#include "venibot/errors.hpp"
#include "venibot/eval.hpp"
#include "venibot/metrics.hpp"
#include "venibot/nn/checkpoint.hpp"
#include "venibot/planner.hpp"
#include "venibot/synth.hpp"
#include "venibot/train.hpp"
#include "venibot/vision.hpp"

namespace fs = std::filesystem;
using namespace venibot;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitWorkspace = 4;

config::RunConfig load_config(const std::string& path) {
  if (path.empty()) return config::parse_run_config("{}", fs::current_path());
  return config::load_run_config(path);
}

/// Exclusive lock on an output directory for the lifetime of a command.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".venibot.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    file_ = std::fopen(path_.string().c_str(), "wx");
    if (!file_) throw IoError("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
  }
  ~DirLock() {
    std::fclose(file_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  std::FILE* file_ = nullptr;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string config, out;
  std::optional<int> volunteers, per_volunteer;
  std::optional<std::uint64_t> seed;
  bool noise_free = false;
};

int cmd_gen(const GenArgs& a) {
  auto cfg = load_config(a.config);
  auto spec = a.noise_free ? cfg.synth.noise_free() : cfg.synth;
  if (a.seed) spec.seed = *a.seed;
  const int volunteers = a.volunteers.value_or(cfg.volunteers);
  const int per = a.per_volunteer.value_or(cfg.images_per_volunteer);
  const fs::path out = a.out.empty() ? cfg.manifest.parent_path() : fs::path(a.out);
  DirLock lock(out);
  const auto m = synth::generate_corpus(spec, volunteers, per, out);
  std::cout << "wrote " << m.samples.size() << " samples to " << (out / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct LabelArgs {
  std::string config, in, out;
};

int cmd_label(const LabelArgs& a) {
  auto cfg = load_config(a.config);
  const fs::path in = fs::is_directory(a.in) ? fs::path(a.in) / "manifest.json" : fs::path(a.in);
  const auto m = synth::read_manifest(in);
  const fs::path out = a.out;
  DirLock lock(out);
  std::ostringstream csv;
  csv << "sample_id,dsc\n";
  int failures = 0;
  std::vector<double> scores;
  for (const auto& e : m.samples) {
    try {
      const auto img = read_image(m.root / e.image_path);
      const auto mask = vision::label_vein(img, cfg.label);
      write_mask(out / (e.sample_id + ".png"), mask);
      const auto gt = read_mask(m.root / e.vein_gt_path);
      const double d = metrics::dsc(mask, gt);
      scores.push_back(d);
      csv << e.sample_id << "," << d << "\n";
    } catch (const std::exception& ex) {
      ++failures;
      spdlog::error("{}: {}", e.sample_id, ex.what());
      csv << e.sample_id << ",error\n";
    }
  }
  write_text(out / "labels.csv", csv.str());
  const auto ms = metrics::mean_std(scores);
  std::cout << "labeled " << scores.size() << " of " << m.samples.size() << " samples";
  if (!scores.empty()) std::cout << ", mean DSC " << ms.mean;
  std::cout << "\n";
  return failures ? kExitData : 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, topology, out;
  int fold = 0;
  int step = 0;  // 0 = every step the topology needs
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
};

struct FoldSamples {
  std::vector<synth::SyntheticSample> train, val;
};

FoldSamples load_fold_samples(const synth::Manifest& m, const eval::Fold& f) {
  const std::set<int> tr(f.train.begin(), f.train.end()), va(f.val.begin(), f.val.end());
  FoldSamples s;
  for (const auto& e : m.samples) {
    if (tr.count(e.volunteer_id)) s.train.push_back(synth::load_sample(m, e));
    else if (va.count(e.volunteer_id)) s.val.push_back(synth::load_sample(m, e));
  }
  if (s.train.empty() || s.val.empty()) throw DataError("fold has no training or validation samples");
  return s;
}

int cmd_train(const TrainArgs& a) {
  auto cfg = load_config(a.config);
  if (!a.topology.empty()) cfg.topology = model::parse_topology(a.topology);
  if (a.iterations) cfg.train.iterations = *a.iterations;
  if (a.seed) cfg.train.seed = *a.seed;
  cfg.train.validate();
  if (a.fold < 0 || a.fold >= cfg.folds)
    throw ConfigError("--fold " + std::to_string(a.fold) + " out of range [0, " + std::to_string(cfg.folds - 1) + "]");
  if (a.step != 0 && a.step != 1 && a.step != 2) throw ConfigError("--step must be 1 or 2");

  const fs::path dir = (a.out.empty() ? cfg.output_dir : fs::path(a.out)) /
                       (model::to_string(cfg.topology) + "_fold" + std::to_string(a.fold));
  const fs::path ckpt1 = dir / "step1.vbnn", ckpt2 = dir / "step2.vbnn";
  const bool dual = model::dual_in(cfg.topology);
  const bool run1 = a.step == 1 || (a.step == 0 && dual);
  const bool run2 = a.step == 2 || a.step == 0;
  if (a.step == 2 && dual && !fs::exists(ckpt1))
    throw DataError("step 2 of " + model::to_string(cfg.topology) + " needs the step-1 checkpoint " + ckpt1.string() +
                    "; run --step 1 first");

  const auto manifest = synth::read_manifest(cfg.manifest);
  const auto split = eval::make_folds(manifest.volunteers(), cfg.fold_seed, cfg.folds);
  const auto data = load_fold_samples(manifest, split.folds[static_cast<std::size_t>(a.fold)]);
  DirLock lock(dir);
  auto tcfg = cfg.train;
  tcfg.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(a.fold));

  std::optional<model::Network<double>> step1;
  if (run1) {
    step1.emplace(model::build<double>(cfg.arch, model::Topology::kSISO, tcfg.batch_size));
    step1->graph.initialize(derive_seed(tcfg.seed, 101));
    const auto h = train::train_step1(*step1, data.train, data.val, tcfg);
    nn::save_checkpoint(ckpt1, train::export_network(*step1));
    train::write_history_csv(h, dir / "history_step1.csv");
    std::cout << "step 1: loss " << h.initial_loss() << " -> " << h.final_loss() << ", best val DSC "
              << h.best_metric << " at iteration " << h.best_iteration << "\n";
  }
  if (run2) {
    if (dual && !step1) step1.emplace(train::import_network<double>(nn::load_checkpoint(ckpt1)));
    auto net = model::build<double>(cfg.arch, cfg.topology, tcfg.batch_size);
    net.graph.initialize(derive_seed(tcfg.seed, 102));
    const auto h = train::train_step2(net, dual ? &*step1 : nullptr, data.train, data.val, tcfg);
    nn::save_checkpoint(ckpt2, train::export_network(net));
    train::write_history_csv(h, dir / "history_step2.csv");
    std::cout << "step 2: loss " << h.initial_loss() << " -> " << h.final_loss() << ", best val MSE "
              << h.best_metric << " at iteration " << h.best_iteration << "\n";
  }
  std::cout << "checkpoints in " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string config, methods = "siso,sido,diso,dido,oracle", out;
  std::optional<int> iterations;
};

int cmd_eval(const EvalArgs& a) {
  auto cfg = load_config(a.config);
  if (a.iterations) cfg.train.iterations = *a.iterations;
  cfg.train.validate();
  std::vector<eval::Method> methods;
  std::stringstream ss(a.methods);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) methods.push_back(eval::parse_method(item));
  if (methods.empty()) throw ConfigError("--methods is empty");
  const auto manifest = synth::read_manifest(cfg.manifest);
  eval::BenchmarkConfig bc{cfg.arch, cfg.train, cfg.fold_seed, cfg.folds, cfg.single_precision};
  const fs::path out = a.out.empty() ? cfg.output_dir : fs::path(a.out);
  DirLock lock(out);
  const auto report = eval::run_benchmark(manifest, methods, bc);
  write_text(out / "report.csv", eval::format_csv(report));
  write_text(out / "report.txt", eval::format_text(report));
  std::cout << eval::format_text(report);
  return 0;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string image, ckpt, overlay, targets;
  double threshold = 0.5;
};

GrayImage resize_to(const GrayImage& img, int w, int h) {
  if (img.width() == w && img.height() == h) return img;
  cv::Mat src(img.height(), img.width(), CV_64F, const_cast<double*>(img.pixels().data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_AREA);
  std::vector<double> v(dst.begin<double>(), dst.end<double>());
  return GrayImage(w, h, std::move(v));
}

int cmd_infer(const InferArgs& a) {
  const auto img = read_image(a.image);
  train::Pipeline<double> p;
  p.threshold = a.threshold;
  p.step2.emplace(train::import_network<double>(nn::load_checkpoint(a.ckpt)));
  p.topology = p.step2->topology;
  if (model::dual_in(p.topology)) {
    const fs::path ckpt1 = fs::path(a.ckpt).parent_path() / "step1.vbnn";
    if (!fs::exists(ckpt1)) throw DataError("dual-input checkpoint needs " + ckpt1.string());
    p.step1.emplace(train::import_network<double>(nn::load_checkpoint(ckpt1)));
  }
  const int nw = p.step2->arch.width, nh = p.step2->arch.height;
  const auto pred = train::infer(p, resize_to(img, nw, nh));
  const double sx = static_cast<double>(img.width()) / nw, sy = static_cast<double>(img.height()) / nh;

  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& t : pred.targets)
    list.push_back({{"component", t.component},
                    {"cx", (t.cx + 0.5) * sx - 0.5},
                    {"cy", (t.cy + 0.5) * sy - 0.5},
                    {"phi_deg", t.phi_deg},
                    {"theta_deg", t.theta_deg}});
  const std::string text = list.dump(2) + "\n";
  if (!a.targets.empty()) write_text(a.targets, text);
  std::cout << text;

  if (!a.overlay.empty()) {
    cv::Mat gray(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255));
    cv::Mat bgr;
    cv::cvtColor(gray, bgr, cv::COLOR_GRAY2BGR);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const int mx = std::min(nw - 1, static_cast<int>(x / sx)), my = std::min(nh - 1, static_cast<int>(y / sy));
        if (!pred.mask.at(mx, my)) continue;
        auto& px = bgr.at<cv::Vec3b>(y, x);
        px = cv::Vec3b(px[0] / 2, static_cast<std::uint8_t>(px[1] / 2 + 127), px[2] / 2);
      }
    for (const auto& t : list) {
      const double phi = t["phi_deg"].get<double>() * std::numbers::pi / 180.0;
      const double cx = t["cx"].get<double>(), cy = t["cy"].get<double>();
      const double half = 0.15 * std::max(img.width(), img.height());
      const cv::Point p0(static_cast<int>(std::lround(cx - half * std::cos(phi))),
                         static_cast<int>(std::lround(cy + half * std::sin(phi))));
      const cv::Point p1(static_cast<int>(std::lround(cx + half * std::cos(phi))),
                         static_cast<int>(std::lround(cy - half * std::sin(phi))));
      cv::line(bgr, p0, p1, cv::Scalar(0, 0, 255), 1, cv::LINE_AA);
    }
    if (!cv::imwrite(a.overlay, bgr)) throw IoError("cannot write " + a.overlay);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string config, calib, target, events;
  bool simulate = false;
  std::optional<double> contact;
};

int cmd_plan(const PlanArgs& a) {
  auto cfg = load_config(a.config);
  if (!a.calib.empty()) {
    std::ifstream in(a.calib);
    if (!in) throw ConfigError("cannot read calibration " + a.calib);
    std::ostringstream ss;
    ss << in.rdbuf();
    cfg.calibration = config::parse_calibration(ss.str());
  }
  planner::PixelTarget t;
  char c1 = 0, c2 = 0;
  std::istringstream ts(a.target);
  if (!(ts >> t.cx >> c1 >> t.cy >> c2 >> t.phi_deg) || c1 != ',' || c2 != ',')
    throw ConfigError("--target expects cx,cy,phi");
  const auto pose = planner::plan(t, cfg.calibration, cfg.limits);
  std::cout << planner::to_json(pose) << "\n";
  if (a.simulate || !a.events.empty()) {
    const auto log =
        planner::simulate_sequence(pose, a.contact.value_or(cfg.contact_height_mm), cfg.limits, cfg.motion);
    const auto lines = planner::to_json_lines(log);
    if (!a.events.empty())
      write_text(a.events, lines);
    else
      std::cout << lines;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"venibot: vein labeling, puncture-target learning and gantry positioning"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log training progress");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic NIR corpus");
  g->add_option("--config", gen.config, "Run config (JSON)");
  g->add_option("--out", gen.out, "Output directory (default: the config's manifest directory)");
  g->add_option("--volunteers", gen.volunteers, "Number of volunteers")->check(CLI::PositiveNumber);
  g->add_option("--per-volunteer", gen.per_volunteer, "Images per volunteer")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_flag("--noise-free", gen.noise_free, "Disable hair, blemish, vignette and sensor noise");

  LabelArgs label;
  auto* l = app.add_subcommand("label", "Run the classical labeling chain over a corpus");
  l->add_option("--config", label.config, "Run config (JSON)");
  l->add_option("--in", label.in, "Corpus manifest or the directory holding it")->required();
  l->add_option("--out", label.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one fold of a topology");
  t->add_option("--config", tr.config, "Run config (JSON)");
  t->add_option("--topology", tr.topology, "siso, sido, diso or dido");
  t->add_option("--fold", tr.fold, "Fold index");
  t->add_option("--step", tr.step, "1 or 2 (default: every step the topology needs)");
  t->add_option("--iterations", tr.iterations, "Override the iteration count")->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.seed, "Override the training seed");
  t->add_option("--out", tr.out, "Output directory (default: the config's output_dir)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Cross-validated benchmark in the two-table format");
  e->add_option("--config", ev.config, "Run config (JSON)");
  e->add_option("--methods", ev.methods, "Comma-separated list of siso, sido, diso, dido, oracle");
  e->add_option("--iterations", ev.iterations, "Override the iteration count")->check(CLI::PositiveNumber);
  e->add_option("--out", ev.out, "Output directory (default: the config's output_dir)");

  InferArgs in;
  auto* i = app.add_subcommand("infer", "Predict puncture targets for one image");
  i->add_option("--image", in.image, "Input image (PNG or PGM)")->required();
  i->add_option("--ckpt", in.ckpt, "Step-2 checkpoint; dual-input nets read step1.vbnn beside it")->required();
  i->add_option("--overlay", in.overlay, "Write an overlay PNG");
  i->add_option("--targets", in.targets, "Write the target list as JSON");
  i->add_option("--threshold", in.threshold, "Area-map threshold")->check(CLI::Range(0.0, 1.0));

  PlanArgs pl;
  auto* p = app.add_subcommand("plan", "Motor setpoints for a pixel target");
  p->add_option("--config", pl.config, "Run config (JSON) with calibration and limits");
  p->add_option("--calib", pl.calib, "Calibration JSON (overrides the config's)");
  p->add_option("--target", pl.target, "cx,cy,phi in pixels and degrees")->required();
  p->add_flag("--simulate", pl.simulate, "Print the simulated event log as JSON lines");
  p->add_option("--events", pl.events, "Write the simulated event log to a file");
  p->add_option("--contact", pl.contact, "Contact height in mm");

  auto* d = app.add_subcommand("defaults", "Print the default run config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*g) return cmd_gen(gen);
    if (*l) return cmd_label(label);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*i) return cmd_infer(in);
    if (*p) return cmd_plan(pl);
    if (*d) {
      std::cout << config::dump_run_config(config::parse_run_config("{}", "."), ".");
      return 0;
    }
  } catch (const WorkspaceError& ex) {
    std::cerr << "workspace error (" << ex.axis() << "): " << ex.what() << "\n";
    return kExitWorkspace;
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return kExitData;
  }
  return 0;
}
