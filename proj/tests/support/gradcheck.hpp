#pragma once

// Central finite-difference checks for single layers and the two losses.
// Every check contracts the output with a random upstream gradient g, so the
// scalar under test is L = sum(g * f(inputs, params)).

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "venibot/nn/layers.hpp"
#include "venibot/nn/loss.hpp"
#include "venibot/rng.hpp"

namespace venibot::testing {

struct GradCheckResult {
  std::string name;
  int trials = 0;
  int checked = 0;   // individual coordinates compared
  int failures = 0;  // coordinates above the tolerance
  double worst_rel = 0.0;
};

inline constexpr double kFdStep = 1e-6;
/// Gradients smaller than this are compared absolutely, since the difference
/// quotient cannot resolve them relatively.
inline constexpr double kRelFloor = 1e-4;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
}

inline void fill_uniform(nn::Tensor<double>& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
}

/// Values in [-1,1] kept at least `gap` away from zero (the ReLU kink).
inline void fill_away_from_zero(nn::Tensor<double>& t, Rng& rng, double gap = 0.05) {
  for (auto& v : t.values()) {
    const double m = rng.uniform(gap, 1.0);
    v = rng.bernoulli(0.5) ? m : -m;
  }
}

/// Compares `coords` random coordinates of inputs and parameters.
inline void check_layer_trial(const nn::LayerSpec& spec, const std::vector<nn::Shape>& in_shapes, bool training,
                              Rng& rng, int coords, GradCheckResult& res, double tol = 1e-4) {
  auto layer = nn::make_layer<double>(spec);
  layer->initialize(rng);
  for (auto* p : layer->parameters()) {
    const bool scale = p->name == "gamma";
    fill_uniform(p->value, rng, scale ? 0.5 : -0.5, scale ? 1.5 : 0.5);
  }
  for (auto& [name, b] : layer->buffers()) {
    const bool var = name == "running_var";
    fill_uniform(*b, rng, var ? 0.5 : -0.5, var ? 1.5 : 0.5);
  }

  std::vector<nn::Tensor<double>> xs;
  for (const auto& s : in_shapes) {
    xs.emplace_back(s);
    fill_away_from_zero(xs.back(), rng);
  }
  auto ptrs = [&] {
    std::vector<const nn::Tensor<double>*> p;
    for (auto& x : xs) p.push_back(&x);
    return p;
  };
  const auto out_shape = layer->infer_shape(in_shapes);
  nn::Tensor<double> g(out_shape);
  fill_uniform(g, rng, -1.0, 1.0);

  auto loss = [&] {
    nn::Tensor<double> y(out_shape);
    const auto p = ptrs();
    // Batch-norm buffers only move in training mode; their values do not
    // enter the training-mode output.
    layer->forward(p, y, training);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += g[i] * y[i];
    return s;
  };

  nn::Tensor<double> y(out_shape);
  {
    const auto p = ptrs();
    layer->forward(p, y, training);
  }
  std::vector<nn::Tensor<double>> dx;
  for (const auto& s : in_shapes) dx.emplace_back(s);
  std::vector<nn::Tensor<double>*> dptr;
  for (auto& d : dx) dptr.push_back(&d);
  for (auto* p : layer->parameters()) p->grad.zero();
  {
    const auto p = ptrs();
    layer->backward(p, y, g, dptr);
  }

  // Candidate coordinates: every input tensor and every parameter.
  struct Slot {
    nn::Tensor<double>* value;
    const nn::Tensor<double>* grad;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < xs.size(); ++i) slots.push_back({&xs[i], &dx[i]});
  for (auto* p : layer->parameters()) slots.push_back({&p->value, &p->grad});

  for (int c = 0; c < coords; ++c) {
    // Round-robin over slots so every tensor is exercised in each trial.
    auto& slot = slots[static_cast<std::size_t>(c) % slots.size()];
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(slot.value->size()) - 1));
    double& v = (*slot.value)[idx];
    const double v0 = v;
    v = v0 + kFdStep;
    const double lp = loss();
    v = v0 - kFdStep;
    const double lm = loss();
    v = v0;
    const double numeric = (lp - lm) / (2.0 * kFdStep);
    const double rel = relative_error((*slot.grad)[idx], numeric);
    res.worst_rel = std::max(res.worst_rel, rel);
    ++res.checked;
    if (!(rel < tol)) ++res.failures;
  }
  ++res.trials;
}

/// Loss gradient check: perturbs prediction coordinates of `f`.
inline void check_loss_trial(const std::function<nn::LossResult<double>(const nn::Tensor<double>&)>& f,
                             nn::Tensor<double> pred, Rng& rng, int coords, GradCheckResult& res,
                             double tol = 1e-4) {
  const auto r = f(pred);
  for (int c = 0; c < coords; ++c) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pred.size()) - 1));
    const double v0 = pred[idx];
    pred[idx] = v0 + kFdStep;
    const double lp = f(pred).value;
    pred[idx] = v0 - kFdStep;
    const double lm = f(pred).value;
    pred[idx] = v0;
    const double rel = relative_error(r.grad[idx], (lp - lm) / (2.0 * kFdStep));
    res.worst_rel = std::max(res.worst_rel, rel);
    ++res.checked;
    if (!(rel < tol)) ++res.failures;
  }
  ++res.trials;
}

/// The full suite: every layer kind (grouped and ungrouped convolutions,
/// transposed convolutions, batch norm in both modes) and both losses.
inline std::vector<GradCheckResult> run_gradient_suite(int trials, std::uint64_t seed, int coords = 12) {
  Rng rng(seed);
  std::vector<GradCheckResult> out;
  auto dims = [&](int c) {
    return nn::Shape{rng.uniform_int(1, 2), c, rng.uniform_int(4, 7), rng.uniform_int(4, 7)};
  };

  auto conv_case = [&](const std::string& name, bool grouped) {
    GradCheckResult r{name};
    for (int t = 0; t < trials; ++t) {
      const int groups = grouped ? (rng.bernoulli(0.5) ? 2 : 4) : 1;
      const int in = groups * rng.uniform_int(1, 2), out_c = groups * rng.uniform_int(1, 2);
      const int k = rng.bernoulli(0.5) ? 3 : 1;
      const int stride = rng.uniform_int(1, 2);
      const int pad = k == 3 ? rng.uniform_int(0, 1) : 0;
      check_layer_trial(nn::Conv{in, out_c, k, stride, pad, groups}, {dims(in)}, true, rng, coords, r);
    }
    out.push_back(r);
  };
  auto transconv_case = [&](const std::string& name, bool grouped) {
    GradCheckResult r{name};
    for (int t = 0; t < trials; ++t) {
      const int groups = grouped ? (rng.bernoulli(0.5) ? 2 : 4) : 1;
      const int in = groups * rng.uniform_int(1, 2), out_c = groups * rng.uniform_int(1, 2);
      const int k = rng.bernoulli(0.5) ? 3 : 2;
      const int stride = rng.uniform_int(1, 2);
      const int pad = k == 3 ? rng.uniform_int(0, 1) : 0;
      const int oph = stride == 2 ? rng.uniform_int(0, 1) : 0, opw = stride == 2 ? rng.uniform_int(0, 1) : 0;
      check_layer_trial(nn::TransConv{in, out_c, k, stride, pad, oph, opw, groups}, {dims(in)}, true, rng, coords, r);
    }
    out.push_back(r);
  };
  conv_case("Conv", false);
  conv_case("Conv grouped", true);
  transconv_case("TransConv", false);
  transconv_case("TransConv grouped", true);

  for (bool training : {true, false}) {
    GradCheckResult r{training ? "BatchNorm train" : "BatchNorm eval"};
    for (int t = 0; t < trials; ++t) {
      const int c = rng.uniform_int(1, 4);
      auto s = dims(c);
      if (training) s.n = 2;  // batch statistics need more than one sample per channel
      check_layer_trial(nn::BatchNorm{c}, {s}, training, rng, coords, r);
    }
    out.push_back(r);
  }

  auto simple = [&](const std::string& name, const nn::LayerSpec& spec, int arity, bool even = false) {
    GradCheckResult r{name};
    for (int t = 0; t < trials; ++t) {
      auto s = dims(rng.uniform_int(1, 3));
      if (even) {
        s.h = 2 * rng.uniform_int(2, 4);
        s.w = 2 * rng.uniform_int(2, 4);
      }
      std::vector<nn::Shape> in;
      for (int a = 0; a < arity; ++a) {
        in.push_back(s);
        if (std::holds_alternative<nn::Concat>(spec)) s.c = rng.uniform_int(1, 3);
      }
      check_layer_trial(spec, in, true, rng, coords, r);
    }
    out.push_back(r);
  };
  simple("ReLU", nn::ReLU{}, 1);
  simple("Sigmoid", nn::Sigmoid{}, 1);
  simple("MaxPool", nn::MaxPool{2, 2}, 1, true);
  simple("Concat", nn::Concat{}, 3);
  simple("Add", nn::Add{}, 2);

  {
    GradCheckResult r{"BCE loss"};
    for (int t = 0; t < trials; ++t) {
      nn::Tensor<double> pred(dims(1)), target(pred.shape());
      fill_uniform(pred, rng, 0.05, 0.95);
      for (auto& v : target.values()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
      check_loss_trial([&](const nn::Tensor<double>& p) { return nn::bce_loss(p, target); }, pred, rng, coords, r);
    }
    out.push_back(r);
  }
  for (bool masked : {false, true}) {
    GradCheckResult r{masked ? "L2 loss masked" : "L2 loss"};
    for (int t = 0; t < trials; ++t) {
      nn::Tensor<double> pred(dims(1)), target(pred.shape()), mask(pred.shape());
      fill_uniform(pred, rng, 0.0, 1.0);
      fill_uniform(target, rng, 0.0, 1.0);
      for (auto& v : mask.values()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
      mask[0] = 1.0;
      check_loss_trial(
          [&](const nn::Tensor<double>& p) { return nn::l2_loss(p, target, masked ? &mask : nullptr); }, pred, rng,
          coords, r);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace venibot::testing
