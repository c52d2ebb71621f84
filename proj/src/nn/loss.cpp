#include "venibot/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "venibot/errors.hpp"

namespace venibot::nn {

namespace {

void same_shape(const Shape& a, const Shape& b, const char* who) {
  if (!(a == b)) throw GraphError(std::string(who) + ": shape " + a.str() + " vs " + b.str());
}

}  // namespace

template <typename T>
LossResult<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  same_shape(pred.shape(), target.shape(), "bce_loss");
  constexpr double kEps = 1e-7;
  LossResult<T> r;
  r.grad = Tensor<T>(pred.shape());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], t = target[i];
    const double pc = std::clamp(p, kEps, 1.0 - kEps);
    sum -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
    if (p > kEps && p < 1.0 - kEps) r.grad[i] = static_cast<T>(inv_n * ((1.0 - t) / (1.0 - pc) - t / pc));
  }
  r.value = sum * inv_n;
  return r;
}

template <typename T>
LossResult<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>* mask) {
  same_shape(pred.shape(), target.shape(), "l2_loss");
  if (mask) same_shape(pred.shape(), mask->shape(), "l2_loss mask");
  LossResult<T> r;
  r.grad = Tensor<T>(pred.shape());
  std::size_t count = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask && (*mask)[i] == T(0)) continue;
    const double d = static_cast<double>(pred[i]) - target[i];
    sum += d * d;
    ++count;
  }
  if (count == 0) {
    r.empty_mask = true;
    return r;
  }
  const double inv_n = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask && (*mask)[i] == T(0)) continue;
    r.grad[i] = static_cast<T>(2.0 * inv_n * (static_cast<double>(pred[i]) - target[i]));
  }
  r.value = sum * inv_n;
  return r;
}

template LossResult<float> bce_loss<float>(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> bce_loss<double>(const Tensor<double>&, const Tensor<double>&);
template LossResult<float> l2_loss<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>*);
template LossResult<double> l2_loss<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>*);

}  // namespace venibot::nn
