#pragma once

#include "venibot/nn/tensor.hpp"

namespace venibot::nn {

/// Geometry of a square-kernel 2-D convolution. Weights are laid out
/// (out_c, in_c / groups, k, k), as in PyTorch.
struct ConvSpec {
  int in_c = 0;
  int out_c = 0;
  int k = 1;
  int stride = 1;
  int pad = 0;
  int groups = 1;

  int out_h(int h) const noexcept { return (h + 2 * pad - k) / stride + 1; }
  int out_w(int w) const noexcept { return (w + 2 * pad - k) / stride + 1; }
  Shape weight_shape() const noexcept { return {out_c, in_c / groups, k, k}; }
  bool pointwise() const noexcept { return k == 1 && stride == 1 && pad == 0; }
  /// Throws ParameterError on non-positive sizes or indivisible groups.
  void validate() const;
};

// Fast kernels: im2col + Eigen GEMM, OpenMP over (sample, group) pairs. The
// weight gradient is reduced over samples in a fixed order, so results do not
// depend on the thread count.

/// y = conv(x, w) + bias. `y` must already have the output shape; `bias` may be null.
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const T* bias, const ConvSpec& spec,
                    Tensor<T>& y);

/// dx += conv^T(dy, w). The extent of `dx` fixes the input size, which lets a
/// transposed convolution request rows/columns the stride would not reach.
template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, const ConvSpec& spec, Tensor<T>& dx);

/// dw += correlation of x with dy; db (optional) += per-channel sum of dy.
template <typename T>
void conv2d_backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const ConvSpec& spec, Tensor<T>& dw,
                            T* db);

namespace reference {

// Serial direct-loop versions with the same contracts; the test oracle and the
// benchmark baseline.

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const T* bias, const ConvSpec& spec,
                    Tensor<T>& y);
template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, const ConvSpec& spec, Tensor<T>& dx);
template <typename T>
void conv2d_backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const ConvSpec& spec, Tensor<T>& dw,
                            T* db);

}  // namespace reference

}  // namespace venibot::nn
