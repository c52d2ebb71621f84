#include "venibot/nn/tensor.hpp"

#include <algorithm>

#include "venibot/errors.hpp"

namespace venibot::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
  if (data_.size() != s.numel())
    throw ParameterError("tensor data has " + std::to_string(data_.size()) + " values, shape " + s.str() +
                         " needs " + std::to_string(s.numel()));
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void Tensor<T>::reset(Shape s) {
  shape_ = s;
  data_.assign(s.numel(), T(0));
}

template <typename T>
void Tensor<T>::add_(const Tensor& other) {
  if (!(other.shape_ == shape_)) throw GraphError("add_: shape " + other.shape_.str() + " vs " + shape_.str());
  const std::size_t n = data_.size();
  T* d = data_.data();
  const T* o = other.data_.data();
#pragma omp parallel for simd if (n > 65536)
  for (std::size_t i = 0; i < n; ++i) d[i] += o[i];
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace venibot::nn
