#include "venibot/nn/graph.hpp"

#include "venibot/errors.hpp"
#include "venibot/rng.hpp"

namespace venibot::nn {

template <typename T>
int Graph<T>::add_input(const std::string& name, Shape shape) {
  if (find(name) >= 0) throw GraphError("duplicate node name '" + name + "'");
  if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0)
    throw GraphError("input '" + name + "' has non-positive shape " + shape.str());
  Node n;
  n.name = name;
  n.shape = shape;
  nodes_.push_back(std::move(n));
  inputs_.push_back(size() - 1);
  return size() - 1;
}

template <typename T>
int Graph<T>::add(const std::string& name, const LayerSpec& spec, std::vector<int> inputs) {
  if (find(name) >= 0) throw GraphError("duplicate node name '" + name + "'");
  if (initialized_) throw StateError("graph '" + name + "': cannot add nodes after initialize()");
  Node n;
  n.name = name;
  n.spec = spec;
  try {
    n.layer = make_layer<T>(spec);
  } catch (const std::exception& e) {
    throw GraphError("node '" + name + "' (" + layer_kind(spec) + "): " + e.what());
  }
  const int arity = n.layer->arity();
  if ((arity >= 0 && static_cast<int>(inputs.size()) != arity) || (arity < 0 && inputs.size() < 2))
    throw GraphError("node '" + name + "' (" + layer_kind(spec) + "): wrong number of inputs (" +
                     std::to_string(inputs.size()) + ")");
  std::vector<Shape> shapes;
  for (int id : inputs) {
    if (id < 0 || id >= size())
      throw GraphError("node '" + name + "': input id " + std::to_string(id) + " does not exist yet");
    shapes.push_back(nodes_[id].shape);
  }
  try {
    n.shape = n.layer->infer_shape(shapes);
  } catch (const std::exception& e) {
    throw GraphError("node '" + name + "' (" + layer_kind(spec) + "): " + e.what());
  }
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return size() - 1;
}

template <typename T>
void Graph<T>::set_outputs(std::vector<int> outputs) {
  for (int id : outputs)
    if (id < 0 || id >= size()) throw GraphError("output id " + std::to_string(id) + " does not exist");
  outputs_ = std::move(outputs);
}

template <typename T>
int Graph<T>::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (nodes_[i].name == name) return i;
  return -1;
}

template <typename T>
void Graph<T>::initialize(std::uint64_t seed) {
  // Each node draws from its own stream, so adding a head does not perturb
  // the initial weights of the shared trunk.
  for (int i = 0; i < size(); ++i) {
    if (!nodes_[i].layer) continue;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    nodes_[i].layer->initialize(rng);
  }
  initialized_ = true;
  forward_done_ = false;
}

template <typename T>
std::vector<Tensor<T>> Graph<T>::forward(const std::vector<Tensor<T>>& inputs) {
  if (!initialized_) throw StateError("forward() before initialize()");
  if (outputs_.empty()) throw GraphError("graph has no designated outputs");
  if (inputs.size() != inputs_.size())
    throw GraphError("forward() got " + std::to_string(inputs.size()) + " inputs, graph declares " +
                     std::to_string(inputs_.size()));
  forward_done_ = false;
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    Node& n = nodes_[inputs_[k]];
    const Shape s = inputs[k].shape();
    if (s.c != n.shape.c || s.h != n.shape.h || s.w != n.shape.w || s.n <= 0)
      throw GraphError("input '" + n.name + "': got " + s.str() + ", declared " + n.shape.str());
    n.value = inputs[k];
  }
  std::vector<const Tensor<T>*> args;
  std::vector<Shape> shapes;
  for (auto& n : nodes_) {
    if (!n.layer) continue;
    args.clear();
    shapes.clear();
    for (int id : n.inputs) {
      args.push_back(&nodes_[id].value);
      shapes.push_back(nodes_[id].value.shape());
    }
    try {
      const Shape s = n.layer->infer_shape(shapes);
      if (!(n.value.shape() == s)) n.value.reset(s);
      n.layer->forward(args, n.value, training_);
    } catch (const GraphError& e) {
      throw GraphError("node '" + n.name + "' (" + layer_kind(n.spec) + "): " + e.what());
    }
  }
  forward_done_ = true;
  std::vector<Tensor<T>> out;
  out.reserve(outputs_.size());
  for (int id : outputs_) out.push_back(nodes_[id].value);
  return out;
}

template <typename T>
const Tensor<T>& Graph<T>::value(int id) const {
  if (!forward_done_) throw StateError("value() before forward()");
  return nodes_.at(id).value;
}

template <typename T>
void Graph<T>::backward(const std::vector<Tensor<T>>& output_grads) {
  if (!forward_done_) throw StateError("backward() without a preceding forward()");
  if (output_grads.size() != outputs_.size())
    throw GraphError("backward() got " + std::to_string(output_grads.size()) + " gradients for " +
                     std::to_string(outputs_.size()) + " outputs");
  for (auto& n : nodes_) n.grad.reset(n.value.shape());
  for (std::size_t k = 0; k < outputs_.size(); ++k) {
    Node& n = nodes_[outputs_[k]];
    if (!(output_grads[k].shape() == n.value.shape()))
      throw GraphError("output '" + n.name + "': gradient " + output_grads[k].shape().str() + " vs value " +
                       n.value.shape().str());
    n.grad.add_(output_grads[k]);
  }
  std::vector<const Tensor<T>*> args;
  std::vector<Tensor<T>*> dins;
  for (int i = size() - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.layer) continue;
    args.clear();
    dins.clear();
    for (int id : n.inputs) {
      args.push_back(&nodes_[id].value);
      dins.push_back(&nodes_[id].grad);
    }
    n.layer->backward(args, n.value, n.grad, dins);
    // This gradient has been pushed to the inputs; release it.
    n.grad = Tensor<T>();
  }
}

template <typename T>
const Tensor<T>& Graph<T>::input_grad(int k) const {
  return nodes_.at(inputs_.at(k)).grad;
}

template <typename T>
std::vector<Parameter<T>*> Graph<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& n : nodes_)
    if (n.layer)
      for (auto* p : n.layer->parameters()) out.push_back(p);
  return out;
}

template <typename T>
void Graph<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.zero();
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Graph<T>::named_tensors() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (auto& n : nodes_) {
    if (!n.layer) continue;
    for (auto* p : n.layer->parameters()) out.emplace_back(n.name + "." + p->name, &p->value);
    for (auto& [name, t] : n.layer->buffers()) out.emplace_back(n.name + "." + name, t);
  }
  return out;
}

template <typename T>
std::uint64_t Graph<T>::param_count() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes_)
    if (n.layer)
      for (const auto& [name, s] : n.layer->parameter_shapes()) total += s.numel();
  return total;
}

template <typename T>
std::uint64_t Graph<T>::flops(FlopConvention convention) const {
  std::uint64_t total = 0;
  std::vector<Shape> shapes;
  for (const auto& n : nodes_) {
    if (!n.layer) continue;
    shapes.clear();
    for (int id : n.inputs) shapes.push_back(nodes_[id].shape);
    total += n.layer->flops(shapes, n.shape, convention);
  }
  return total;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace venibot::nn
