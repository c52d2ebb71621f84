#pragma once

#include <cstdint>
#include <vector>

#include "venibot/nn/tensor.hpp"

namespace venibot::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Classic L2: weight_decay * param is added to the gradient before the moments.
  double weight_decay = 1e-5;

  void validate() const;
};

/// Adam with bias correction.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg);

  void step();
  void zero_grad();

  double lr() const noexcept { return cfg_.lr; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  std::int64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

enum class PlateauMode { kMin, kMax };

/// ReduceLROnPlateau with PyTorch semantics: a metric improves when it beats
/// the best so far by the relative threshold; after more than `patience`
/// consecutive non-improving steps the rate is multiplied by `factor` and the
/// counter restarts.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauMode mode, double factor = 0.5, int patience = 5, double threshold = 1e-4,
                            double min_lr = 0.0);

  /// Feeds one validation metric; returns the learning rate to use next.
  double step(double metric, double lr);

  int bad_steps() const noexcept { return bad_; }
  double best() const noexcept { return best_; }
  PlateauMode mode() const noexcept { return mode_; }

 private:
  bool improves(double metric) const;

  PlateauMode mode_;
  double factor_;
  int patience_;
  double threshold_;
  double min_lr_;
  double best_;
  int bad_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace venibot::nn
