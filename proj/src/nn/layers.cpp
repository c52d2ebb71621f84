#include "venibot/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "venibot/errors.hpp"

namespace venibot::nn {

std::string layer_kind(const LayerSpec& spec) {
  struct Visitor {
    std::string operator()(const Conv&) const { return "Conv"; }
    std::string operator()(const TransConv&) const { return "TransConv"; }
    std::string operator()(const BatchNorm&) const { return "BatchNorm"; }
    std::string operator()(const ReLU&) const { return "ReLU"; }
    std::string operator()(const Sigmoid&) const { return "Sigmoid"; }
    std::string operator()(const Concat&) const { return "Concat"; }
    std::string operator()(const MaxPool&) const { return "MaxPool"; }
    std::string operator()(const Add&) const { return "Add"; }
  };
  return std::visit(Visitor{}, spec);
}

namespace {

void expect_channels(const Shape& s, int c) {
  if (s.c != c) throw GraphError("expects " + std::to_string(c) + " input channels, got " + s.str());
}

template <typename T>
void he_uniform(Tensor<T>& w, double fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  explicit ConvLayer(const Conv& c) : spec_{c.in, c.out, c.k, c.stride, c.pad, c.groups} { spec_.validate(); }

  Shape infer_shape(std::span<const Shape> in) const override {
    expect_channels(in[0], spec_.in_c);
    const int ho = spec_.out_h(in[0].h), wo = spec_.out_w(in[0].w);
    if (ho <= 0 || wo <= 0) throw GraphError("input " + in[0].str() + " smaller than the kernel");
    return {in[0].n, spec_.out_c, ho, wo};
  }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    conv2d_forward(*in[0], weight_.value, bias_.value.data(), spec_, out);
  }

  void backward(std::span<const Tensor<T>* const> in, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    conv2d_backward_weight(*in[0], dout, spec_, weight_.grad, bias_.grad.data());
    if (din[0]) conv2d_backward_input(dout, weight_.value, spec_, *din[0]);
  }

  std::vector<std::pair<std::string, Shape>> parameter_shapes() const override {
    return {{"weight", spec_.weight_shape()}, {"bias", Shape{spec_.out_c, 1, 1, 1}}};
  }

  void initialize(Rng& rng) override {
    weight_ = {"weight", Tensor<T>(spec_.weight_shape()), Tensor<T>(spec_.weight_shape())};
    bias_ = {"bias", Tensor<T>(Shape{spec_.out_c, 1, 1, 1}), Tensor<T>(Shape{spec_.out_c, 1, 1, 1})};
    he_uniform(weight_.value, static_cast<double>(spec_.in_c / spec_.groups) * spec_.k * spec_.k, rng);
  }

  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

  std::uint64_t flops(std::span<const Shape>, const Shape& out, FlopConvention c) const override {
    const std::uint64_t macs = static_cast<std::uint64_t>(spec_.k) * spec_.k * (spec_.in_c / spec_.groups) *
                               spec_.out_c * out.plane() * out.n;
    if (c == FlopConvention::kFormula) return 2 * macs;
    return macs + static_cast<std::uint64_t>(spec_.out_c) * out.plane() * out.n;
  }

 private:
  ConvSpec spec_;
  Parameter<T> weight_, bias_;
};

// A transposed convolution is the adjoint of the convolution `spec_` that maps
// its output back to its input, so it runs on the same kernels with the roles
// of forward and backward-input exchanged.
template <typename T>
class TransConvLayer final : public Layer<T> {
 public:
  explicit TransConvLayer(const TransConv& t)
      : t_(t), spec_{t.out, t.in, t.k, t.stride, t.pad, t.groups} {
    spec_.validate();
    if (t.out_pad_h < 0 || t.out_pad_w < 0 || t.out_pad_h >= t.stride || t.out_pad_w >= t.stride)
      throw ParameterError("transconv: output padding must lie in [0, stride)");
  }

  Shape infer_shape(std::span<const Shape> in) const override {
    expect_channels(in[0], t_.in);
    const int ho = (in[0].h - 1) * t_.stride - 2 * t_.pad + t_.k + t_.out_pad_h;
    const int wo = (in[0].w - 1) * t_.stride - 2 * t_.pad + t_.k + t_.out_pad_w;
    if (ho <= 0 || wo <= 0) throw GraphError("non-positive output size for input " + in[0].str());
    return {in[0].n, t_.out, ho, wo};
  }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    out.zero();
    conv2d_backward_input(*in[0], weight_.value, spec_, out);
    const Shape s = out.shape();
    const T* b = bias_.value.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        T* p = out.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) p[i] += b[c];
      }
  }

  void backward(std::span<const Tensor<T>* const> in, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    conv2d_backward_weight(dout, *in[0], spec_, weight_.grad, static_cast<T*>(nullptr));
    const Shape s = dout.shape();
    T* db = bias_.grad.data();
    for (int c = 0; c < s.c; ++c) {
      T acc = db[c];
      for (int n = 0; n < s.n; ++n) {
        const T* p = dout.plane(n, c);
        T sum = 0;
        for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
        acc += sum;
      }
      db[c] = acc;
    }
    if (din[0]) {
      Tensor<T> tmp(din[0]->shape());
      conv2d_forward(dout, weight_.value, static_cast<const T*>(nullptr), spec_, tmp);
      din[0]->add_(tmp);
    }
  }

  std::vector<std::pair<std::string, Shape>> parameter_shapes() const override {
    return {{"weight", spec_.weight_shape()}, {"bias", Shape{t_.out, 1, 1, 1}}};
  }

  void initialize(Rng& rng) override {
    weight_ = {"weight", Tensor<T>(spec_.weight_shape()), Tensor<T>(spec_.weight_shape())};
    bias_ = {"bias", Tensor<T>(Shape{t_.out, 1, 1, 1}), Tensor<T>(Shape{t_.out, 1, 1, 1})};
    // Each output sums about (in/groups)*k*k/stride^2 products.
    const double fan_in =
        std::max(1.0, static_cast<double>(t_.in / t_.groups) * t_.k * t_.k / (t_.stride * t_.stride));
    he_uniform(weight_.value, fan_in, rng);
  }

  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

  std::uint64_t flops(std::span<const Shape>, const Shape& out, FlopConvention c) const override {
    if (c == FlopConvention::kTorchstat) return 0;
    return 2ULL * t_.k * t_.k * (t_.in / t_.groups) * t_.out * out.plane() * out.n;
  }

 private:
  TransConv t_;
  ConvSpec spec_;
  Parameter<T> weight_, bias_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(const BatchNorm& b) : bn_(b) {
    if (b.channels <= 0 || !(b.eps > 0.0) || !(b.momentum >= 0.0 && b.momentum <= 1.0))
      throw ParameterError("batchnorm: invalid channels/eps/momentum");
  }

  Shape infer_shape(std::span<const Shape> in) const override {
    expect_channels(in[0], bn_.channels);
    return in[0];
  }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool training) override {
    const Tensor<T>& x = *in[0];
    const Shape s = x.shape();
    const std::size_t m = static_cast<std::size_t>(s.n) * s.plane();
    mean_.assign(s.c, 0.0);
    invstd_.assign(s.c, 0.0);
    used_batch_stats_ = training;
    if (training && m < 2) throw GraphError("batchnorm needs more than one value per channel in training");
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
      double mu, var;
      if (training) {
        double sum = 0.0;
        for (int n = 0; n < s.n; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
        }
        mu = sum / m;
        double sq = 0.0;
        for (int n = 0; n < s.n; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t i = 0; i < s.plane(); ++i) sq += (p[i] - mu) * (p[i] - mu);
        }
        var = sq / m;
        running_mean_[c] = static_cast<T>((1.0 - bn_.momentum) * running_mean_[c] + bn_.momentum * mu);
        running_var_[c] =
            static_cast<T>((1.0 - bn_.momentum) * running_var_[c] + bn_.momentum * sq / (m - 1));
      } else {
        mu = running_mean_[c];
        var = running_var_[c];
      }
      const double inv = 1.0 / std::sqrt(var + bn_.eps);
      mean_[c] = mu;
      invstd_[c] = inv;
      const double g = gamma_.value[c], b = beta_.value[c];
      for (int n = 0; n < s.n; ++n) {
        const T* p = x.plane(n, c);
        T* q = out.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) q[i] = static_cast<T>(g * (p[i] - mu) * inv + b);
      }
    }
  }

  void backward(std::span<const Tensor<T>* const> in, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    const Tensor<T>& x = *in[0];
    const Shape s = x.shape();
    const double m = static_cast<double>(s.n) * s.plane();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
      const double mu = mean_[c], inv = invstd_[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = x.plane(n, c);
        const T* d = dout.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          sum_dy += d[i];
          sum_dy_xhat += d[i] * (p[i] - mu) * inv;
        }
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      if (!din[0]) continue;
      const double g = gamma_.value[c];
      for (int n = 0; n < s.n; ++n) {
        const T* p = x.plane(n, c);
        const T* d = dout.plane(n, c);
        T* q = din[0]->plane(n, c);
        if (used_batch_stats_) {
          for (std::size_t i = 0; i < s.plane(); ++i) {
            const double xhat = (p[i] - mu) * inv;
            q[i] += static_cast<T>(g * inv / m * (m * d[i] - sum_dy - xhat * sum_dy_xhat));
          }
        } else {
          for (std::size_t i = 0; i < s.plane(); ++i) q[i] += static_cast<T>(g * inv * d[i]);
        }
      }
    }
  }

  std::vector<std::pair<std::string, Shape>> parameter_shapes() const override {
    return {{"gamma", Shape{bn_.channels, 1, 1, 1}}, {"beta", Shape{bn_.channels, 1, 1, 1}}};
  }

  void initialize(Rng&) override {
    const Shape s{bn_.channels, 1, 1, 1};
    gamma_ = {"gamma", Tensor<T>(s, T(1)), Tensor<T>(s)};
    beta_ = {"beta", Tensor<T>(s), Tensor<T>(s)};
    running_mean_ = Tensor<T>(s);
    running_var_ = Tensor<T>(s, T(1));
  }

  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }

  std::uint64_t flops(std::span<const Shape> in, const Shape&, FlopConvention c) const override {
    return c == FlopConvention::kTorchstat ? 2 * in[0].numel() : 0;
  }

 private:
  BatchNorm bn_;
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  std::vector<double> mean_, invstd_;
  bool used_batch_stats_ = false;
};

template <typename T>
class ReLULayer final : public Layer<T> {
 public:
  Shape infer_shape(std::span<const Shape> in) const override { return in[0]; }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    const T* x = in[0]->data();
    T* y = out.data();
    const std::size_t n = out.size();
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  }

  void backward(std::span<const Tensor<T>* const> in, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    if (!din[0]) return;
    const T* x = in[0]->data();
    const T* d = dout.data();
    T* g = din[0]->data();
    const std::size_t n = dout.size();
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::size_t i = 0; i < n; ++i) g[i] += x[i] > T(0) ? d[i] : T(0);
  }

  std::uint64_t flops(std::span<const Shape> in, const Shape&, FlopConvention c) const override {
    return c == FlopConvention::kTorchstat ? in[0].numel() : 0;
  }
};

template <typename T>
class SigmoidLayer final : public Layer<T> {
 public:
  Shape infer_shape(std::span<const Shape> in) const override { return in[0]; }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    const T* x = in[0]->data();
    T* y = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
  }

  void backward(std::span<const Tensor<T>* const>, const Tensor<T>& out, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    if (!din[0]) return;
    const T* y = out.data();
    const T* d = dout.data();
    T* g = din[0]->data();
    for (std::size_t i = 0; i < out.size(); ++i) g[i] += d[i] * y[i] * (T(1) - y[i]);
  }

  std::uint64_t flops(std::span<const Shape>, const Shape&, FlopConvention) const override { return 0; }
};

template <typename T>
class ConcatLayer final : public Layer<T> {
 public:
  int arity() const override { return -1; }

  Shape infer_shape(std::span<const Shape> in) const override {
    Shape out = in[0];
    out.c = 0;
    for (const auto& s : in) {
      if (s.n != in[0].n || s.h != in[0].h || s.w != in[0].w)
        throw GraphError("concat inputs disagree: " + in[0].str() + " vs " + s.str());
      out.c += s.c;
    }
    return out;
  }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    const Shape s = out.shape();
    for (int n = 0; n < s.n; ++n) {
      int c0 = 0;
      for (const auto* t : in) {
        std::copy_n(t->plane(n, 0), static_cast<std::size_t>(t->shape().c) * s.plane(), out.plane(n, c0));
        c0 += t->shape().c;
      }
    }
  }

  void backward(std::span<const Tensor<T>* const> in, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    const Shape s = dout.shape();
    for (int n = 0; n < s.n; ++n) {
      int c0 = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t len = static_cast<std::size_t>(in[k]->shape().c) * s.plane();
        if (din[k]) {
          const T* src = dout.plane(n, c0);
          T* dst = din[k]->plane(n, 0);
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        c0 += in[k]->shape().c;
      }
    }
  }

  std::uint64_t flops(std::span<const Shape>, const Shape&, FlopConvention) const override { return 0; }
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  explicit MaxPoolLayer(const MaxPool& p) : p_(p) {
    if (p.k <= 0 || p.stride <= 0) throw ParameterError("maxpool: k and stride must be positive");
  }

  Shape infer_shape(std::span<const Shape> in) const override {
    const int ho = (in[0].h - p_.k) / p_.stride + 1, wo = (in[0].w - p_.k) / p_.stride + 1;
    if (in[0].h < p_.k || in[0].w < p_.k) throw GraphError("input " + in[0].str() + " smaller than the window");
    return {in[0].n, in[0].c, ho, wo};
  }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    const Tensor<T>& x = *in[0];
    const Shape xs = x.shape(), ys = out.shape();
    argmax_.assign(out.size(), 0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < ys.n; ++n)
      for (int c = 0; c < ys.c; ++c) {
        const T* p = x.plane(n, c);
        T* q = out.plane(n, c);
        const std::size_t base = (static_cast<std::size_t>(n) * ys.c + c) * ys.plane();
        for (int oy = 0; oy < ys.h; ++oy)
          for (int ox = 0; ox < ys.w; ++ox) {
            T best = -std::numeric_limits<T>::infinity();
            int arg = 0;
            for (int ky = 0; ky < p_.k; ++ky)
              for (int kx = 0; kx < p_.k; ++kx) {
                const int idx = (oy * p_.stride + ky) * xs.w + ox * p_.stride + kx;
                if (p[idx] > best) {
                  best = p[idx];
                  arg = idx;
                }
              }
            q[oy * ys.w + ox] = best;
            argmax_[base + oy * ys.w + ox] = arg;
          }
      }
  }

  void backward(std::span<const Tensor<T>* const>, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    if (!din[0]) return;
    const Shape ys = dout.shape();
    for (int n = 0; n < ys.n; ++n)
      for (int c = 0; c < ys.c; ++c) {
        const T* d = dout.plane(n, c);
        T* g = din[0]->plane(n, c);
        const std::size_t base = (static_cast<std::size_t>(n) * ys.c + c) * ys.plane();
        for (std::size_t i = 0; i < ys.plane(); ++i) g[argmax_[base + i]] += d[i];
      }
  }

  std::uint64_t flops(std::span<const Shape>, const Shape& out, FlopConvention c) const override {
    return c == FlopConvention::kTorchstat ? static_cast<std::uint64_t>(p_.k) * p_.k * out.numel() : 0;
  }

 private:
  MaxPool p_;
  std::vector<int> argmax_;
};

template <typename T>
class AddLayer final : public Layer<T> {
 public:
  int arity() const override { return 2; }

  Shape infer_shape(std::span<const Shape> in) const override {
    if (!(in[0] == in[1])) throw GraphError("add inputs disagree: " + in[0].str() + " vs " + in[1].str());
    return in[0];
  }

  void forward(std::span<const Tensor<T>* const> in, Tensor<T>& out, bool) override {
    const T* a = in[0]->data();
    const T* b = in[1]->data();
    T* y = out.data();
    const std::size_t n = out.size();
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
  }

  void backward(std::span<const Tensor<T>* const>, const Tensor<T>&, const Tensor<T>& dout,
                std::span<Tensor<T>* const> din) override {
    for (auto* d : din)
      if (d) d->add_(dout);
  }

  std::uint64_t flops(std::span<const Shape>, const Shape&, FlopConvention) const override { return 0; }
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  struct Visitor {
    std::unique_ptr<Layer<T>> operator()(const Conv& c) const { return std::make_unique<ConvLayer<T>>(c); }
    std::unique_ptr<Layer<T>> operator()(const TransConv& c) const {
      return std::make_unique<TransConvLayer<T>>(c);
    }
    std::unique_ptr<Layer<T>> operator()(const BatchNorm& b) const {
      return std::make_unique<BatchNormLayer<T>>(b);
    }
    std::unique_ptr<Layer<T>> operator()(const ReLU&) const { return std::make_unique<ReLULayer<T>>(); }
    std::unique_ptr<Layer<T>> operator()(const Sigmoid&) const { return std::make_unique<SigmoidLayer<T>>(); }
    std::unique_ptr<Layer<T>> operator()(const Concat&) const { return std::make_unique<ConcatLayer<T>>(); }
    std::unique_ptr<Layer<T>> operator()(const MaxPool& p) const { return std::make_unique<MaxPoolLayer<T>>(p); }
    std::unique_ptr<Layer<T>> operator()(const Add&) const { return std::make_unique<AddLayer<T>>(); }
  };
  return std::visit(Visitor{}, spec);
}

template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&);

}  // namespace venibot::nn
