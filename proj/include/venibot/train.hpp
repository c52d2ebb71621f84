#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "venibot/augment.hpp"
#include "venibot/geometry.hpp"
#include "venibot/model.hpp"
#include "venibot/nn/checkpoint.hpp"
#include "venibot/synth.hpp"

namespace venibot::train {

/// Optimisation settings; the defaults are the standard recipe.
struct TrainConfig {
  int batch_size = 2;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  int iterations = 1575;
  /// Iterations between validations; 0 picks 50 for step 1 and single-input
  /// step-2 nets, 20 for dual-input step-2 nets.
  int val_interval = 0;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  std::uint64_t seed = 0;
  bool augment_step1 = true;
  bool augment_step2 = true;
  augment::AugmentPolicy policy;  // output size is overridden by the arch
  /// Binarization threshold of the regressed area map.
  double threshold = 0.5;

  void validate() const;
  int interval_for(int step, model::Topology topology) const;
};

struct HistoryRow {
  int iteration = 0;
  double loss = 0.0;  // mean training loss since the previous row
  double val_metric = 0.0;
  double lr = 0.0;
};

struct History {
  std::vector<double> iteration_loss;  // one entry per iteration
  std::vector<HistoryRow> rows;  // one per validation
  double best_metric = 0.0;
  int best_iteration = 0;

  /// Means over the first / last min(20, n/5) iterations.
  double initial_loss() const;
  double final_loss() const;
  /// final_loss() <= 0.5 * initial_loss(); recorded, never enforced.
  bool converged() const;
};

void write_history_csv(const History& h, const std::filesystem::path& path);

/// A sample brought to the network input size with every training target.
using Example = augment::AugmentedSample;

/// Plain resize of a sample to `width` x `height` (no augmentation).
Example fit_to(const synth::SyntheticSample& sample, int width, int height);

/// Network inputs and targets for a batch of examples.
template <typename T>
struct Batch {
  nn::Tensor<T> image;       // (N,1,H,W)
  nn::Tensor<T> vein;        // vein mask as {0,1}
  nn::Tensor<T> area;        // suitable mask as {0,1}
  nn::Tensor<T> angle;       // (phi + 90) / 180 on suitable pixels, 0 elsewhere
  nn::Tensor<T> angle_mask;  // 1 on suitable pixels
};

template <typename T>
Batch<T> make_batch(const std::vector<const Example*>& examples);

/// Two-channel step-2 input: the image and the step-1 pre-sigmoid map,
/// standardized per image to zero mean and unit variance.
template <typename T>
nn::Tensor<T> dual_input(model::Network<T>& step1, const nn::Tensor<T>& image);

/// Both steps of a trained model.
template <typename T>
struct Pipeline {
  model::Topology topology = model::Topology::kDIDO;
  std::optional<model::Network<T>> step1;  // segmentation net, frozen after step 1
  std::optional<model::Network<T>> step2;  // regression net
  History history1;
  History history2;
  double threshold = 0.5;
};

/// Step 1: SISO vein segmentation with BCE; validation DSC drives a max-mode
/// plateau scheduler and the best validation state is restored at the end.
template <typename T>
History train_step1(model::Network<T>& net, const std::vector<synth::SyntheticSample>& train,
                    const std::vector<synth::SyntheticSample>& val, const TrainConfig& cfg);

/// Step 2: area map (L2) and, for two-output nets, the angle map (L2 masked to
/// suitable pixels). `step1` is required for dual-input nets and is never
/// modified. Validation MSE drives a min-mode plateau scheduler.
template <typename T>
History train_step2(model::Network<T>& net, model::Network<T>* step1,
                    const std::vector<synth::SyntheticSample>& train,
                    const std::vector<synth::SyntheticSample>& val, const TrainConfig& cfg);

/// Builds and trains the nets a topology needs (step 1 only for dual input).
template <typename T>
Pipeline<T> train_pipeline(model::Topology topology, const model::ArchConfig& arch,
                           const std::vector<synth::SyntheticSample>& train,
                           const std::vector<synth::SyntheticSample>& val, const TrainConfig& cfg);

/// Regressed maps and the targets decoded from them.
struct Prediction {
  GrayImage area;
  std::optional<GrayImage> angle;
  BinaryMask mask;          // thresholded area map
  std::vector<int> labels;  // component id per pixel, 0 = background
  std::vector<geometry::PunctureTarget> targets;  // targets[k] describes component k+1
};

/// Thresholds the area map and decodes one target per component: the angle is
/// 180 * mean(angle map) - 90 when an angle map is given, else the
/// ellipse-fit angle of the component.
Prediction decode(GrayImage area, std::optional<GrayImage> angle, double threshold);

/// Runs a trained pipeline on one image already at the network input size.
template <typename T>
Prediction infer(Pipeline<T>& pipeline, const GrayImage& image);

/// FNV-1a hash over every parameter and buffer of a graph.
template <typename T>
std::uint64_t parameter_hash(nn::Graph<T>& g);

/// Checkpoint records for a network, with its arch and topology as a JSON
/// header record named "__arch__".
template <typename T>
std::vector<nn::StoredTensor> export_network(model::Network<T>& net);
template <typename T>
model::Network<T> import_network(const std::vector<nn::StoredTensor>& records);

}  // namespace venibot::train
