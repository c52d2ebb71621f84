// Serial reference kernels vs. the im2col/GEMM kernels with OpenMP, on layer
// shapes of the desk-scale network, plus one full training step.
//
//   OMP_NUM_THREADS=4 ./venibot_bench

#include <benchmark/benchmark.h>
#include <omp.h>

#include "venibot/model.hpp"
#include "venibot/nn/kernels.hpp"
#include "venibot/nn/loss.hpp"
#include "venibot/rng.hpp"

using namespace venibot;

namespace {

struct Case {
  nn::ConvSpec spec;
  int h, w;
};

// Conv0, a grouped 3x3 of Res-layer1, a pointwise expansion, a decoder 3x3.
const Case kCases[] = {
    {{1, 8, 7, 2, 3, 1}, 64, 104},
    {{16, 16, 3, 1, 1, 4}, 32, 52},
    {{16, 32, 1, 1, 0, 1}, 32, 52},
    {{64, 32, 3, 1, 1, 1}, 16, 26},
};

struct Data {
  nn::Tensor<double> x, w, b, y, dy, dx, dw, db;

  explicit Data(const Case& c) {
    const auto& s = c.spec;
    Rng rng(1);
    auto fill = [&](nn::Tensor<double>& t) {
      for (auto& v : t.values()) v = rng.uniform(-1, 1);
    };
    x = nn::Tensor<double>({2, s.in_c, c.h, c.w});
    w = nn::Tensor<double>(s.weight_shape());
    b = nn::Tensor<double>({s.out_c, 1, 1, 1});
    y = nn::Tensor<double>({2, s.out_c, s.out_h(c.h), s.out_w(c.w)});
    dy = y;
    dx = x;
    dw = w;
    db = b;
    fill(x);
    fill(w);
    fill(b);
    fill(dy);
  }
};

template <bool kFast>
void BM_ConvForward(benchmark::State& state) {
  const auto& c = kCases[state.range(0)];
  Data d(c);
  for (auto _ : state) {
    if constexpr (kFast)
      nn::conv2d_forward(d.x, d.w, d.b.data(), c.spec, d.y);
    else
      nn::reference::conv2d_forward(d.x, d.w, d.b.data(), c.spec, d.y);
    benchmark::DoNotOptimize(d.y.data());
  }
  state.SetLabel(kFast ? "im2col+gemm, threads=" + std::to_string(omp_get_max_threads()) : "serial reference");
}

template <bool kFast>
void BM_ConvBackward(benchmark::State& state) {
  const auto& c = kCases[state.range(0)];
  Data d(c);
  for (auto _ : state) {
    if constexpr (kFast) {
      nn::conv2d_backward_input(d.dy, d.w, c.spec, d.dx);
      nn::conv2d_backward_weight(d.x, d.dy, c.spec, d.dw, d.db.data());
    } else {
      nn::reference::conv2d_backward_input(d.dy, d.w, c.spec, d.dx);
      nn::reference::conv2d_backward_weight(d.x, d.dy, c.spec, d.dw, d.db.data());
    }
    benchmark::DoNotOptimize(d.dw.data());
  }
}

template <typename T>
void BM_DeskTrainingStep(benchmark::State& state) {
  auto net = model::build<T>(model::ArchConfig::desk_scale(), model::Topology::kDIDO, 2);
  net.graph.initialize(1);
  nn::Tensor<T> x(net.graph.node(net.graph.inputs()[0]).shape);
  Rng rng(2);
  for (auto& v : x.values()) v = static_cast<T>(rng.uniform());
  for (auto _ : state) {
    const auto out = net.graph.forward({x});
    std::vector<nn::Tensor<T>> grads;
    for (const auto& o : out) grads.push_back(nn::l2_loss(o, nn::Tensor<T>(o.shape())).grad);
    net.graph.zero_grad();
    net.graph.backward(grads);
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeskTrainingStep<double>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeskTrainingStep<float>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
