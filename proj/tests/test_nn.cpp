#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/gradcheck.hpp"
#include "venibot/errors.hpp"
#include "venibot/nn/checkpoint.hpp"
#include "venibot/nn/graph.hpp"
#include "venibot/nn/kernels.hpp"
#include "venibot/nn/layers.hpp"
#include "venibot/nn/loss.hpp"

using namespace venibot;
using nn::Shape;
using nn::Tensor;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng) {
  Tensor<double> t(s);
  testing::fill_uniform(t, rng, -1.0, 1.0);
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

nn::ConvSpec random_spec(Rng& rng) {
  nn::ConvSpec s;
  s.groups = std::vector<int>{1, 2, 4}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
  s.in_c = s.groups * rng.uniform_int(1, 3);
  s.out_c = s.groups * rng.uniform_int(1, 3);
  s.k = std::vector<int>{1, 3, 7}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
  s.stride = rng.uniform_int(1, 2);
  s.pad = rng.uniform_int(0, s.k / 2);
  return s;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("fast convolution kernels agree with the serial reference") {
    Rng rng(1);
    for (int trial = 0; trial < 40; ++trial) {
      const auto spec = random_spec(rng);
      const Shape xs{rng.uniform_int(1, 3), spec.in_c, rng.uniform_int(7, 12), rng.uniform_int(7, 12)};
      const Shape ys{xs.n, spec.out_c, spec.out_h(xs.h), spec.out_w(xs.w)};
      const auto x = random_tensor(xs, rng), w = random_tensor(spec.weight_shape(), rng), dy = random_tensor(ys, rng);
      const auto b = random_tensor({spec.out_c, 1, 1, 1}, rng);
      Tensor<double> y1(ys), y2(ys);
      nn::conv2d_forward(x, w, b.data(), spec, y1);
      nn::reference::conv2d_forward(x, w, b.data(), spec, y2);
      CHECK(max_abs_diff(y1, y2) < 1e-12);

      Tensor<double> dx1(xs), dx2(xs);
      nn::conv2d_backward_input(dy, w, spec, dx1);
      nn::reference::conv2d_backward_input(dy, w, spec, dx2);
      CHECK(max_abs_diff(dx1, dx2) < 1e-12);

      Tensor<double> dw1(spec.weight_shape()), dw2(spec.weight_shape()), db1({spec.out_c, 1, 1, 1}),
          db2({spec.out_c, 1, 1, 1});
      nn::conv2d_backward_weight(x, dy, spec, dw1, db1.data());
      nn::reference::conv2d_backward_weight(x, dy, spec, dw2, db2.data());
      CHECK(max_abs_diff(dw1, dw2) < 1e-11);
      CHECK(max_abs_diff(db1, db2) < 1e-12);
    }
  }

  TEST_CASE("input gradient is the adjoint of the forward convolution") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const auto spec = random_spec(rng);
      const Shape xs{2, spec.in_c, 9, 10};
      const Shape ys{2, spec.out_c, spec.out_h(9), spec.out_w(10)};
      const auto x = random_tensor(xs, rng), w = random_tensor(spec.weight_shape(), rng), y = random_tensor(ys, rng);
      Tensor<double> ax(ys), aty(xs);
      nn::conv2d_forward(x, w, static_cast<const double*>(nullptr), spec, ax);
      nn::conv2d_backward_input(y, w, spec, aty);
      CHECK(dot(ax, y) == doctest::Approx(dot(x, aty)).epsilon(1e-12));
    }
  }

  TEST_CASE("transposed convolution is the adjoint of convolution") {
    // <conv(x), y> == <transconv(y), x> with the transposed layer sharing the weight.
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const int groups = rng.uniform_int(1, 2);
      const int cin = 2 * groups, cout = 3 * groups;
      const int k = 3, stride = 2, pad = 1;
      nn::Conv cspec{cin, cout, k, stride, pad, groups};
      auto conv = nn::make_layer<double>(cspec);
      conv->initialize(rng);
      const Shape xs{1, cin, 9, 9};
      const Shape ys = conv->infer_shape(std::vector<Shape>{xs});
      nn::TransConv tspec{cout, cin, k, stride, pad, 0, 0, groups};
      auto tconv = nn::make_layer<double>(tspec);
      tconv->initialize(rng);
      REQUIRE(tconv->infer_shape(std::vector<Shape>{ys}) == xs);
      // Share the weight, zero both biases.
      tconv->parameters()[0]->value = conv->parameters()[0]->value;
      conv->parameters()[1]->value.zero();
      tconv->parameters()[1]->value.zero();
      const auto x = random_tensor(xs, rng), y = random_tensor(ys, rng);
      Tensor<double> cx(ys), ty(xs);
      const Tensor<double>* in1[] = {&x};
      const Tensor<double>* in2[] = {&y};
      conv->forward(in1, cx, true);
      tconv->forward(in2, ty, true);
      CHECK(dot(cx, y) == doctest::Approx(dot(ty, x)).epsilon(1e-12));
    }
  }

  TEST_CASE("grouped convolution equals independent convolutions per group") {
    Rng rng(4);
    const nn::ConvSpec g{4, 6, 3, 1, 1, 2};
    const Shape xs{1, 4, 6, 6};
    const auto x = random_tensor(xs, rng), w = random_tensor(g.weight_shape(), rng);
    Tensor<double> y({1, 6, 6, 6});
    nn::conv2d_forward(x, w, static_cast<const double*>(nullptr), g, y);
    const nn::ConvSpec single{2, 3, 3, 1, 1, 1};
    for (int grp = 0; grp < 2; ++grp) {
      Tensor<double> xg({1, 2, 6, 6}), wg(single.weight_shape()), yg({1, 3, 6, 6});
      std::copy_n(x.plane(0, 2 * grp), 2 * 36, xg.data());
      std::copy_n(w.data() + grp * wg.size(), wg.size(), wg.data());
      nn::conv2d_forward(xg, wg, static_cast<const double*>(nullptr), single, yg);
      for (std::size_t i = 0; i < yg.size(); ++i) CHECK(yg[i] == doctest::Approx(y.plane(0, 3 * grp)[i]));
    }
  }

  TEST_CASE("batch norm in eval mode with fresh statistics is the identity up to eps") {
    auto bn = nn::make_layer<double>(nn::BatchNorm{3});
    Rng rng(5);
    bn->initialize(rng);
    const auto x = random_tensor({2, 3, 4, 4}, rng);
    Tensor<double> y(x.shape());
    const Tensor<double>* in[] = {&x};
    bn->forward(in, y, false);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)));
  }

  TEST_CASE("batch norm running statistics follow momentum 0.1 with unbiased variance") {
    auto bn = nn::make_layer<double>(nn::BatchNorm{1});
    Rng rng(6);
    bn->initialize(rng);
    Tensor<double> x({1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4});
    Tensor<double> y(x.shape());
    const Tensor<double>* in[] = {&x};
    bn->forward(in, y, true);
    const auto buffers = bn->buffers();
    CHECK((*buffers[0].second)[0] == doctest::Approx(0.25));               // 0.9*0 + 0.1*2.5
    CHECK((*buffers[1].second)[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3));  // unbiased var 5/3
  }

  TEST_CASE("gradient suite") {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& r : testing::run_gradient_suite(50, 2024)) {
      INFO(r.name << " worst relative error " << r.worst_rel);
      CHECK(r.trials == 50);
      CHECK(r.failures == 0);
    }
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 120.0);
  }

  TEST_CASE("losses") {
    Tensor<double> p({1, 1, 1, 2}, std::vector<double>{0.25, 0.5});
    Tensor<double> t({1, 1, 1, 2}, std::vector<double>{1.0, 0.0});
    CHECK(nn::bce_loss(p, t).value == doctest::Approx(-(std::log(0.25) + std::log(0.5)) / 2));
    CHECK(nn::l2_loss(p, t).value == doctest::Approx((0.5625 + 0.25) / 2));
    Tensor<double> m({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
    CHECK(nn::l2_loss(p, t, &m).value == doctest::Approx(0.25));
    m.zero();
    const auto empty = nn::l2_loss(p, t, &m);
    CHECK(empty.value == 0.0);
    CHECK(empty.empty_mask);
    for (double g : empty.grad.values()) CHECK(g == 0.0);
  }

  TEST_CASE("bce clamps saturated predictions") {
    Tensor<double> p({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
    Tensor<double> t({1, 1, 1, 2}, std::vector<double>{1.0, 0.0});
    const auto r = nn::bce_loss(p, t);
    CHECK(std::isfinite(r.value));
    CHECK(r.value == doctest::Approx(-std::log(1e-7)));
    CHECK(r.grad[0] == 0.0);
  }

  TEST_CASE("graph wiring errors name the node") {
    nn::Graph<double> g;
    const int x = g.add_input("x", {1, 3, 8, 8});
    try {
      g.add("bad", nn::Conv{4, 8, 3, 1, 1, 1}, {x});
      FAIL("expected a graph error");
    } catch (const GraphError& e) {
      CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
    CHECK_THROWS_AS(g.add("late", nn::ReLU{}, {5}), GraphError);
    CHECK_THROWS_AS(g.add("x", nn::ReLU{}, {x}), GraphError);
  }

  TEST_CASE("graph lifecycle") {
    nn::Graph<double> g;
    const int x = g.add_input("x", {1, 2, 4, 4});
    const int c = g.add("conv", nn::Conv{2, 2, 3, 1, 1, 1}, {x});
    g.set_outputs({c});
    CHECK_THROWS_AS(g.forward({Tensor<double>({1, 2, 4, 4})}), StateError);
    g.initialize(1);
    CHECK_THROWS_AS(g.backward({Tensor<double>({1, 2, 4, 4})}), StateError);
    const auto y = g.forward({Tensor<double>({3, 2, 4, 4}, 1.0)});
    CHECK(y[0].shape() == Shape{3, 2, 4, 4});
    CHECK(g.param_count() == 2 * 2 * 9 + 2);
  }

  TEST_CASE("graph backward matches finite differences through a skip connection") {
    nn::Graph<double> g;
    const int x = g.add_input("x", {2, 2, 5, 5});
    const int c1 = g.add("c1", nn::Conv{2, 4, 3, 1, 1, 2}, {x});
    const int bn = g.add("bn", nn::BatchNorm{4}, {c1});
    const int r = g.add("relu", nn::ReLU{}, {bn});
    const int c2 = g.add("c2", nn::Conv{4, 2, 1, 1, 0, 1}, {r});
    const int sum = g.add("sum", nn::Add{}, {c2, x});
    const int cat = g.add("cat", nn::Concat{}, {sum, r});
    const int up = g.add("up", nn::TransConv{6, 1, 2, 2, 0, 1, 0, 1}, {cat});
    const int s = g.add("sig", nn::Sigmoid{}, {up});
    g.set_outputs({s});
    g.initialize(3);
    Rng rng(7);
    auto in = random_tensor({2, 2, 5, 5}, rng);
    const auto target = random_tensor(g.node(s).shape, rng);
    auto loss = [&](const Tensor<double>& v) {
      const auto out = g.forward({v});
      return nn::l2_loss(out[0], target);
    };
    const auto base = loss(in);
    g.zero_grad();
    g.backward({base.grad});
    const auto dx = g.input_grad(0);
    for (int k = 0; k < 10; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(in.size()) - 1));
      const double v0 = in[i];
      in[i] = v0 + 1e-6;
      const double lp = loss(in).value;
      in[i] = v0 - 1e-6;
      const double lm = loss(in).value;
      in[i] = v0;
      CHECK(testing::relative_error(dx[i], (lp - lm) / 2e-6) < 1e-4);
    }
  }

  TEST_CASE("checkpoints round trip and convert precision") {
    nn::Graph<double> g;
    const int x = g.add_input("x", {1, 2, 4, 4});
    const int c = g.add("conv", nn::Conv{2, 3, 3, 1, 1, 1}, {x});
    const int b = g.add("bn", nn::BatchNorm{3}, {c});
    g.set_outputs({b});
    g.initialize(11);
    const auto path = std::filesystem::temp_directory_path() / "venibot_ckpt_test.vbnn";
    nn::save_checkpoint(path, nn::export_graph(g));
    const auto records = nn::load_checkpoint(path);

    nn::Graph<double> h;
    const int hx = h.add_input("x", {1, 2, 4, 4});
    const int hc = h.add("conv", nn::Conv{2, 3, 3, 1, 1, 1}, {hx});
    const int hb = h.add("bn", nn::BatchNorm{3}, {hc});
    h.set_outputs({hb});
    h.initialize(99);
    nn::import_graph(h, records);
    auto gt = g.named_tensors(), ht = h.named_tensors();
    REQUIRE(gt.size() == ht.size());
    for (std::size_t i = 0; i < gt.size(); ++i) CHECK(*gt[i].second == *ht[i].second);

    nn::Graph<float> f;
    const int fx = f.add_input("x", {1, 2, 4, 4});
    const int fc = f.add("conv", nn::Conv{2, 3, 3, 1, 1, 1}, {fx});
    f.add("bn", nn::BatchNorm{3}, {fc});
    f.initialize(5);
    nn::import_graph(f, records);
    CHECK(f.named_tensors()[0].second->values()[0] == static_cast<float>(gt[0].second->values()[0]));
    std::filesystem::remove(path);
  }

  TEST_CASE("missing checkpoint tensors and corrupt files are data errors") {
    nn::Graph<double> g;
    const int x = g.add_input("x", {1, 1, 4, 4});
    g.add("conv", nn::Conv{1, 1, 3, 1, 1, 1}, {x});
    g.initialize(1);
    try {
      nn::import_graph(g, {});
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("conv.weight") != std::string::npos);
    }
    const auto path = std::filesystem::temp_directory_path() / "venibot_bad.vbnn";
    {
      std::ofstream out(path, std::ios::binary);
      out << "NOPE";
    }
    CHECK_THROWS_AS(nn::load_checkpoint(path), DataError);
    std::filesystem::remove(path);
  }
}
