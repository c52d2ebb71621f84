#pragma once

#include "venibot/nn/tensor.hpp"

namespace venibot::nn {

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  // d loss / d pred
  bool empty_mask = false;  // masked loss with no selected element
};

/// Mean binary cross-entropy of sigmoid outputs against {0,1} targets; pred
/// is clamped to [1e-7, 1-1e-7] (zero gradient where the clamp is active).
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean squared error. With a mask, the mean runs over mask-true (non-zero)
/// elements only; an all-false mask gives 0 loss, zero gradient and
/// `empty_mask` set.
template <typename T>
LossResult<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>* mask = nullptr);

}  // namespace venibot::nn
