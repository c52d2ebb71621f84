#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "venibot/nn/layers.hpp"
#include "venibot/nn/tensor.hpp"

namespace venibot::nn {

/// A DAG of layers. Nodes are appended in topological order (a node may only
/// consume nodes that already exist), so the graph is acyclic by construction
/// and insertion order is a valid execution order. Shapes are checked as nodes
/// are added, against the declared input shapes.
///
/// Parameters are not allocated until initialize(), so shape and size audits
/// of the full-scale network cost nothing. A graph is single-owner: forward()
/// keeps every activation for the following backward().
template <typename T>
class Graph {
 public:
  struct Node {
    std::string name;
    LayerSpec spec;  // meaningless for input nodes
    std::unique_ptr<Layer<T>> layer;  // null for input nodes
    std::vector<int> inputs;
    Shape shape;  // for the declared batch size
    Tensor<T> value;
    Tensor<T> grad;
  };

  int add_input(const std::string& name, Shape shape);
  int add(const std::string& name, const LayerSpec& spec, std::vector<int> inputs);
  void set_outputs(std::vector<int> outputs);

  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_.at(id); }
  int find(const std::string& name) const;  // -1 when absent
  const std::vector<int>& inputs() const noexcept { return inputs_; }
  const std::vector<int>& outputs() const noexcept { return outputs_; }

  void initialize(std::uint64_t seed);
  bool initialized() const noexcept { return initialized_; }

  void set_training(bool on) noexcept { training_ = on; }
  bool training() const noexcept { return training_; }

  /// Runs the graph; input batch sizes may differ from the declared one, the
  /// other extents must match. Returns the designated outputs in order.
  std::vector<Tensor<T>> forward(const std::vector<Tensor<T>>& inputs);
  /// Value of any node from the last forward pass.
  const Tensor<T>& value(int id) const;
  /// Backpropagates `output_grads` (one per output, same shapes) and
  /// accumulates into parameter gradients; input-node gradients become
  /// available through input_grad().
  void backward(const std::vector<Tensor<T>>& output_grads);
  const Tensor<T>& input_grad(int k) const;

  std::vector<Parameter<T>*> parameters();
  void zero_grad();
  /// Parameters and buffers under "node.param" names, for checkpoints.
  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors();

  /// Analytic counts from the declared shapes; no allocation needed.
  std::uint64_t param_count() const;
  std::uint64_t flops(FlopConvention convention) const;

 private:
  std::vector<Node> nodes_;
  std::vector<int> inputs_;
  std::vector<int> outputs_;
  bool initialized_ = false;
  bool training_ = true;
  bool forward_done_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace venibot::nn
