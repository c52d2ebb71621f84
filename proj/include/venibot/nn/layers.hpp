#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "venibot/nn/kernels.hpp"
#include "venibot/nn/tensor.hpp"
#include "venibot/rng.hpp"

namespace venibot::nn {

// Layer descriptions. Every convolution carries a bias, so its parameter count
// is (in/groups)*out*k*k + out.

struct Conv {
  int in = 0, out = 0, k = 1, stride = 1, pad = 0, groups = 1;
};
/// Transposed convolution; output = (H-1)*stride - 2*pad + k + out_pad, with
/// separate output padding per axis so odd skip sizes (13, 7, ...) can be met.
struct TransConv {
  int in = 0, out = 0, k = 1, stride = 1, pad = 0, out_pad_h = 0, out_pad_w = 0, groups = 1;
};
struct BatchNorm {
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
};
struct ReLU {};
struct Sigmoid {};
struct Concat {};  // along channels
struct MaxPool {
  int k = 2, stride = 2;
};
struct Add {};

using LayerSpec = std::variant<Conv, TransConv, BatchNorm, ReLU, Sigmoid, Concat, MaxPool, Add>;

std::string layer_kind(const LayerSpec& spec);

/// How operations are counted by flops().
enum class FlopConvention {
  /// 2*k*k*(in/groups)*out*H_out*W_out for every convolution and transposed
  /// convolution; nothing else counted.
  kFormula,
  /// The counting of the torchstat profiler: convolution multiply-accumulates
  /// plus one op per bias, 2 per element for affine batch norm, 1 per element
  /// for ReLU, k*k per pooled element; transposed convolutions and
  /// functional ops (concat, add, sigmoid) count zero.
  kTorchstat,
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  /// Number of inputs; -1 for variadic (at least two).
  virtual int arity() const { return 1; }
  /// Output shape for the given input shapes; throws GraphError with the reason.
  virtual Shape infer_shape(std::span<const Shape> in) const = 0;
  virtual void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool training) = 0;
  /// Accumulates input gradients into `din` (entries may be null) and
  /// parameter gradients into the layer's parameters.
  virtual void backward(std::span<const Tensor<T>* const> in, const Tensor<T>& out, const Tensor<T>& dout,
                        std::span<Tensor<T>* const> din) = 0;

  /// Parameter shapes, available before allocation.
  virtual std::vector<std::pair<std::string, Shape>> parameter_shapes() const { return {}; }
  /// Allocates parameters and buffers and draws initial values.
  virtual void initialize(Rng&) {}
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  /// Non-trainable state saved in checkpoints (batch-norm running statistics).
  virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }

  virtual std::uint64_t flops(std::span<const Shape> in, const Shape& out, FlopConvention conv) const = 0;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec);

}  // namespace venibot::nn
