#include "venibot/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "venibot/errors.hpp"

namespace venibot::nn {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ParameterError("adam: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ParameterError("adam: betas must lie in [0,1)");
  if (!(eps > 0.0)) throw ParameterError("adam: eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ParameterError("adam: weight_decay must be >= 0");
}

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (auto* p : params_) {
    if (!(p->grad.shape() == p->value.shape()))
      throw StateError("adam: parameter '" + p->name + "' has no gradient buffer");
    m_.emplace_back(p->value.size(), T(0));
    v_.emplace_back(p->value.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    T* w = params_[k]->value.data();
    const T* g = params_[k]->grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    const std::size_t n = params_[k]->value.size();
#pragma omp parallel for schedule(static) if (n > 65536)
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]) + cfg_.weight_decay * static_cast<double>(w[i]);
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] = static_cast<T>(w[i] - cfg_.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->grad.zero();
}

PlateauScheduler::PlateauScheduler(PlateauMode mode, double factor, int patience, double threshold, double min_lr)
    : mode_(mode), factor_(factor), patience_(patience), threshold_(threshold), min_lr_(min_lr) {
  if (!(factor > 0.0 && factor < 1.0)) throw ParameterError("plateau: factor must lie in (0,1)");
  if (patience < 0) throw ParameterError("plateau: patience must be >= 0");
  if (!(threshold >= 0.0)) throw ParameterError("plateau: threshold must be >= 0");
  best_ = mode == PlateauMode::kMin ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
}

bool PlateauScheduler::improves(double metric) const {
  if (mode_ == PlateauMode::kMin) return metric < best_ * (1.0 - threshold_);
  return metric > best_ * (1.0 + threshold_);
}

double PlateauScheduler::step(double metric, double lr) {
  if (improves(metric)) {
    best_ = metric;
    bad_ = 0;
    return lr;
  }
  if (++bad_ > patience_) {
    bad_ = 0;
    return std::max(lr * factor_, min_lr_);
  }
  return lr;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace venibot::nn
