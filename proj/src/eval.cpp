#include "venibot/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "venibot/errors.hpp"
#include "venibot/rng.hpp"

namespace venibot::eval {

FoldSplit make_folds(std::vector<int> volunteers, std::uint64_t seed, int k) {
  if (k < 2) throw ConfigError("folds: k must be >= 2");
  std::sort(volunteers.begin(), volunteers.end());
  volunteers.erase(std::unique(volunteers.begin(), volunteers.end()), volunteers.end());
  if (static_cast<int>(volunteers.size()) < k)
    throw DataError("folds: " + std::to_string(volunteers.size()) + " volunteers cannot fill " + std::to_string(k) +
                    " folds");
  Rng rng(derive_seed(seed, 0x666f6c6473ULL));
  rng.shuffle(volunteers.begin(), volunteers.end());
  FoldSplit split;
  split.groups.resize(k);
  const std::size_t n = volunteers.size();
  for (int g = 0; g < k; ++g) {
    const std::size_t lo = n * g / k, hi = n * (g + 1) / k;
    split.groups[g].assign(volunteers.begin() + static_cast<std::ptrdiff_t>(lo),
                           volunteers.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  for (int i = 0; i < k; ++i) {
    Fold f;
    f.test = split.groups[i];
    f.val = split.groups[(i + 1) % k];
    for (int g = 0; g < k; ++g)
      if (g != i && g != (i + 1) % k) f.train.insert(f.train.end(), split.groups[g].begin(), split.groups[g].end());
    std::sort(f.train.begin(), f.train.end());
    split.folds.push_back(std::move(f));
  }
  check_no_leakage(split);
  return split;
}

void check_no_leakage(const FoldSplit& split) {
  for (std::size_t i = 0; i < split.folds.size(); ++i) {
    const auto& f = split.folds[i];
    std::set<int> seen;
    for (const auto* role : {&f.train, &f.val, &f.test})
      for (int v : *role)
        if (!seen.insert(v).second)
          throw DataError("fold " + std::to_string(i) + ": volunteer " + std::to_string(v) + " has two roles");
  }
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kSISO: return "SISO";
    case Method::kSIDO: return "SIDO";
    case Method::kDISO: return "DISO";
    case Method::kDIDO: return "DIDO";
    case Method::kOracle: return "Oracle";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto m : {Method::kSISO, Method::kSIDO, Method::kDISO, Method::kDIDO, Method::kOracle}) {
    std::string name = to_string(m);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == u) return m;
  }
  throw ConfigError("unknown method '" + s + "' (expected siso, sido, diso, dido or oracle)");
}

std::vector<double> Row::pooled() const {
  std::vector<double> out;
  for (const auto& f : per_fold) out.insert(out.end(), f.begin(), f.end());
  return out;
}

SampleScore score(const train::Prediction& pred, const train::Example& truth) {
  SampleScore s;
  s.dsc_percent = 100.0 * metrics::dsc(pred.mask, truth.suitable);
  metrics::LabelledAngles p{pred.mask.width(), pred.mask.height(), pred.labels, {}};
  for (const auto& t : pred.targets) p.phi_deg.push_back(t.phi_deg);
  metrics::LabelledAngles g{truth.suitable.width(), truth.suitable.height(), truth.target_labels, {}};
  for (const auto& t : truth.targets) g.phi_deg.push_back(t.phi_deg);
  s.angle_errors = metrics::angle_errors(p, g);
  return s;
}

train::Prediction oracle_prediction(const train::Example& truth, double threshold) {
  const int w = truth.suitable.width(), h = truth.suitable.height();
  GrayImage area(w, h), angle(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = truth.target_labels[static_cast<std::size_t>(y) * w + x];
      if (!truth.suitable.at(x, y)) continue;
      area.at(x, y) = 1.0;
      if (l > 0) angle.at(x, y) = (truth.targets[l - 1].phi_deg + 90.0) / 180.0;
    }
  return train::decode(std::move(area), std::move(angle), threshold);
}

namespace {

struct FoldData {
  std::vector<synth::SyntheticSample> train, val, test;
};

FoldData load_fold(const synth::Manifest& m, const Fold& f) {
  FoldData d;
  const std::set<int> tr(f.train.begin(), f.train.end()), va(f.val.begin(), f.val.end()),
      te(f.test.begin(), f.test.end());
  for (const auto& e : m.samples) {
    if (tr.count(e.volunteer_id)) d.train.push_back(synth::load_sample(m, e));
    else if (va.count(e.volunteer_id)) d.val.push_back(synth::load_sample(m, e));
    else if (te.count(e.volunteer_id)) d.test.push_back(synth::load_sample(m, e));
  }
  return d;
}

Row& row(std::vector<Row>& rows, const std::string& name, int folds) {
  for (auto& r : rows)
    if (r.name == name) return r;
  rows.push_back({name, std::vector<std::vector<double>>(folds)});
  return rows.back();
}

template <typename T>
void run_fold(int fold, const FoldData& data, const std::vector<Method>& methods, const BenchmarkConfig& cfg,
              MetricsReport& report) {
  std::vector<train::Example> test;
  for (const auto& s : data.test) test.push_back(train::fit_to(s, cfg.arch.width, cfg.arch.height));
  auto tcfg = cfg.train;
  tcfg.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(fold));

  auto record = [&](const std::string& name, train::Pipeline<T>* pipeline) {
    auto& dsc_row = row(report.dsc, name, cfg.folds);
    auto& angle_row = row(report.angle, name, cfg.folds);
    for (const auto& ex : test) {
      const auto pred = pipeline ? train::infer(*pipeline, ex.image) : oracle_prediction(ex, tcfg.threshold);
      const auto s = score(pred, ex);
      dsc_row.per_fold[fold].push_back(s.dsc_percent);
      angle_row.per_fold[fold].insert(angle_row.per_fold[fold].end(), s.angle_errors.begin(), s.angle_errors.end());
    }
  };

  const bool need_step1 = std::any_of(methods.begin(), methods.end(),
                                      [](Method m) { return m == Method::kDISO || m == Method::kDIDO; });
  std::optional<model::Network<T>> step1;
  if (need_step1) {
    spdlog::info("fold {}: step 1 (segmentation)", fold);
    step1.emplace(model::build<T>(cfg.arch, model::Topology::kSISO, tcfg.batch_size));
    step1->graph.initialize(derive_seed(tcfg.seed, 101));
    train::train_step1(*step1, data.train, data.val, tcfg);
    auto& seg = row(report.dsc, "Segmentation", cfg.folds);
    for (const auto& ex : test) {
      nn::Tensor<T> x({1, 1, ex.image.height(), ex.image.width()});
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(ex.image.pixels()[i]);
      step1->graph.set_training(false);
      const auto out = step1->graph.forward({x});
      BinaryMask m(ex.image.width(), ex.image.height());
      for (std::size_t i = 0; i < x.size(); ++i) m.bits()[i] = out[0][i] >= T(0.5) ? 1 : 0;
      seg.per_fold[fold].push_back(100.0 * metrics::dsc(m, ex.vein));
    }
  }

  for (Method m : methods) {
    if (m == Method::kOracle) {
      record("Oracle", nullptr);
      continue;
    }
    const auto topo = model::parse_topology(to_string(m));
    spdlog::info("fold {}: {} step 2", fold, to_string(m));
    train::Pipeline<T> p;
    p.topology = topo;
    p.threshold = tcfg.threshold;
    p.step2.emplace(model::build<T>(cfg.arch, topo, tcfg.batch_size));
    p.step2->graph.initialize(derive_seed(tcfg.seed, 102));
    model::Network<T>* s1 = model::dual_in(topo) ? &*step1 : nullptr;
    p.history2 = train::train_step2(*p.step2, s1, data.train, data.val, tcfg);
    if (s1) {
      // The pipeline borrows the shared step-1 net for inference only.
      p.step1.emplace(std::move(*step1));
      record(to_string(m), &p);
      step1.emplace(std::move(*p.step1));
    } else {
      record(to_string(m), &p);
    }
  }
}

}  // namespace

MetricsReport run_benchmark(const synth::Manifest& manifest, const std::vector<Method>& methods,
                            const BenchmarkConfig& cfg) {
  if (methods.empty()) throw ConfigError("benchmark: no methods given");
  cfg.arch.validate();
  cfg.train.validate();
  const auto split = make_folds(manifest.volunteers(), cfg.fold_seed, cfg.folds);
  MetricsReport report;
  report.folds = cfg.folds;
  // Fix the row order up front: segmentation first, then methods as given.
  if (std::any_of(methods.begin(), methods.end(), [](Method m) { return m == Method::kDISO || m == Method::kDIDO; }))
    row(report.dsc, "Segmentation", cfg.folds);
  for (Method m : methods) {
    row(report.dsc, to_string(m), cfg.folds);
    row(report.angle, to_string(m), cfg.folds);
  }
  const bool oracle_only = std::all_of(methods.begin(), methods.end(), [](Method m) { return m == Method::kOracle; });
  for (int f = 0; f < cfg.folds; ++f) {
    FoldData data = load_fold(manifest, split.folds[f]);
    if (data.test.empty()) throw DataError("fold " + std::to_string(f) + " has no test samples");
    if (!oracle_only && (data.train.empty() || data.val.empty()))
      throw DataError("fold " + std::to_string(f) + " has no training or validation samples");
    if (cfg.single_precision) run_fold<float>(f, data, methods, cfg, report);
    else run_fold<double>(f, data, methods, cfg, report);
  }
  return report;
}

std::string format_cell(const std::vector<double>& values) {
  if (values.empty()) return "n/a";
  const auto ms = metrics::mean_std(values);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", ms.mean, ms.std);
  return buf;
}

namespace {

std::vector<std::string> header(int folds) {
  std::vector<std::string> h{"Method"};
  for (int f = 0; f < folds; ++f) h.push_back("Fold " + std::to_string(f));
  h.push_back("Average");
  return h;
}

std::vector<std::string> cells(const Row& r) {
  std::vector<std::string> c{r.name};
  for (const auto& f : r.per_fold) c.push_back(format_cell(f));
  c.push_back(format_cell(r.pooled()));
  return c;
}

// Display width, counting the UTF-8 plus-minus sign as one column.
std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

void table(std::ostringstream& os, const std::string& title, const std::vector<Row>& rows, int folds) {
  std::vector<std::vector<std::string>> grid{header(folds)};
  for (const auto& r : rows) grid.push_back(cells(r));
  std::vector<std::size_t> wid(grid[0].size(), 0);
  for (const auto& line : grid)
    for (std::size_t i = 0; i < line.size(); ++i) wid[i] = std::max(wid[i], width(line[i]));
  os << title << "\n";
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      os << line[i];
      if (i + 1 < line.size()) os << std::string(wid[i] - width(line[i]) + 2, ' ');
    }
    os << "\n";
  }
}

}  // namespace

std::string format_text(const MetricsReport& report) {
  std::ostringstream os;
  table(os, "DSC (%), mean±std", report.dsc, report.folds);
  os << "\n";
  table(os, "Angle error (deg), mean±std", report.angle, report.folds);
  return os.str();
}

std::string format_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "table";
  for (const auto& h : header(report.folds)) os << "," << h;
  os << "\n";
  for (const auto& [name, rows] : {std::pair{"dsc", &report.dsc}, std::pair{"angle", &report.angle}})
    for (const auto& r : *rows) {
      os << name;
      for (const auto& c : cells(r)) os << "," << c;
      os << "\n";
    }
  return os.str();
}

}  // namespace venibot::eval
