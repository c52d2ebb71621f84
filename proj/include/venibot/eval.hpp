#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "venibot/metrics.hpp"
#include "venibot/model.hpp"
#include "venibot/synth.hpp"
#include "venibot/train.hpp"

namespace venibot::eval {

/// Volunteer-level cross-validation split.
struct Fold {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

struct FoldSplit {
  std::vector<std::vector<int>> groups;  // shuffled volunteer groups
  std::vector<Fold> folds;  // fold i tests group i, validates on group (i+1) % k
};

/// Shuffles the volunteers with `seed` and deals them into `k` groups whose
/// sizes differ by at most one. Needs at least k volunteers.
FoldSplit make_folds(std::vector<int> volunteers, std::uint64_t seed, int k = 5);

/// Throws DataError if any volunteer has two roles within a fold.
void check_no_leakage(const FoldSplit& split);

enum class Method { kSISO, kSIDO, kDISO, kDIDO, kOracle };

std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Per-fold raw values of one report row.
struct Row {
  std::string name;
  std::vector<std::vector<double>> per_fold;  // DSC in percent, or angle errors in degrees

  std::vector<double> pooled() const;
};

/// The two result tables: DSC (segmentation and area regression) and angle error.
struct MetricsReport {
  int folds = 5;
  std::vector<Row> dsc;
  std::vector<Row> angle;
};

struct BenchmarkConfig {
  model::ArchConfig arch;
  train::TrainConfig train;
  std::uint64_t fold_seed = 0;
  int folds = 5;
  bool single_precision = false;
};

/// Trains and evaluates every method on every fold. Step 1 is trained once per
/// fold and shared by the dual-input methods; its test DSC forms the
/// "Segmentation" row.
MetricsReport run_benchmark(const synth::Manifest& manifest, const std::vector<Method>& methods,
                            const BenchmarkConfig& cfg);

/// Evaluation of one prediction against one example at network resolution.
struct SampleScore {
  double dsc_percent = 0.0;
  std::vector<double> angle_errors;
};
SampleScore score(const train::Prediction& pred, const train::Example& truth);

/// The prediction of the oracle method: the ground-truth maps, decoded.
train::Prediction oracle_prediction(const train::Example& truth, double threshold);

/// "mean±std" with two decimals, or "n/a" for an empty cell.
std::string format_cell(const std::vector<double>& values);
/// Aligned text tables with columns Fold 0..k-1 and Average.
std::string format_text(const MetricsReport& report);
/// CSV with columns table, method, Fold 0..k-1, Average.
std::string format_csv(const MetricsReport& report);

}  // namespace venibot::eval
