#include "venibot/model.hpp"

#include <algorithm>
#include <cctype>

#include "venibot/errors.hpp"

namespace venibot::model {

ArchConfig ArchConfig::full_scale() {
  ArchConfig a;
  a.width_divisor = 1;
  a.cardinality = 32;
  a.height = 128;
  a.width = 208;
  return a;
}

ArchConfig ArchConfig::desk_scale() { return ArchConfig{}; }

namespace {

// Reference widths: Conv0, per-stage {mid, out}, decoder stages, head.
constexpr int kStem = 64;
constexpr std::array<std::array<int, 2>, 4> kRes{{{128, 256}, {256, 512}, {512, 1024}, {1024, 2048}}};
constexpr std::array<int, 3> kDecoder{1024, 512, 256};
constexpr int kHeadUp = 128;
constexpr int kHead = 64;

int conv_out(int x, int k, int s, int p) { return (x + 2 * p - k) / s + 1; }

// Output padding that makes a stride-2, k=3, pad=1 transposed conv land on `target`.
int out_pad_for(int in, int target) { return target - ((in - 1) * 2 - 2 + 3); }

}  // namespace

void ArchConfig::validate() const {
  if (width_divisor <= 0 || cardinality <= 0) throw ConfigError("arch: width_divisor and cardinality must be > 0");
  for (int d : depths)
    if (d <= 0) throw ConfigError("arch: stage depths must be > 0");
  auto check = [&](int ref, const char* what) {
    if (ref % width_divisor != 0)
      throw ConfigError(std::string("arch: ") + what + " width " + std::to_string(ref) +
                        " not divisible by width_divisor " + std::to_string(width_divisor));
  };
  check(kStem, "stem");
  check(kHeadUp, "head");
  check(kHead, "head");
  for (auto [mid, out] : kRes) {
    check(mid, "bottleneck");
    check(out, "stage output");
    if ((mid / width_divisor) % cardinality != 0)
      throw ConfigError("arch: bottleneck width " + std::to_string(mid / width_divisor) +
                        " not divisible by cardinality " + std::to_string(cardinality));
  }
  for (int d : kDecoder) check(d, "decoder");
  if (height < 16 || width < 16) throw ConfigError("arch: input must be at least 16x16");
  // Every transposed conv must restore its skip size exactly.
  for (int dim : {height, width}) {
    std::array<int, 5> sizes{};
    sizes[0] = conv_out(dim, 7, 2, 3);
    for (int i = 1; i < 4; ++i) sizes[i] = conv_out(sizes[i - 1], 3, 2, 1);
    sizes[4] = dim;
    // sizes: [res1, res2, res3, res4, input]; decoder goes res4->res3->res2->res1->input.
    const std::array<std::pair<int, int>, 4> ups{
        {{sizes[3], sizes[2]}, {sizes[2], sizes[1]}, {sizes[1], sizes[0]}, {sizes[0], sizes[4]}}};
    for (auto [from, to] : ups) {
      const int op = out_pad_for(from, to);
      if (op < 0 || op > 1)
        throw ConfigError("arch: input " + std::to_string(height) + "x" + std::to_string(width) +
                          " cannot be restored by the decoder (" + std::to_string(from) + " -> " +
                          std::to_string(to) + ")");
    }
  }
}

std::string to_string(Topology t) {
  switch (t) {
    case Topology::kSISO: return "SISO";
    case Topology::kSIDO: return "SIDO";
    case Topology::kDISO: return "DISO";
    case Topology::kDIDO: return "DIDO";
  }
  return "?";
}

Topology parse_topology(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto t : {Topology::kSISO, Topology::kSIDO, Topology::kDISO, Topology::kDIDO})
    if (to_string(t) == u) return t;
  throw ConfigError("unknown topology '" + s + "' (expected siso, sido, diso or dido)");
}

namespace {

template <typename T>
class Builder {
 public:
  Builder(nn::Graph<T>& g, const ArchConfig& a) : g_(g), a_(a) {}

  int w(int ref) const { return ref / a_.width_divisor; }
  int channels(int node) const { return g_.node(node).shape.c; }

  // conv -> [bn] -> relu (relu optional)
  int conv_bn(const std::string& name, int x, int out, int k, int stride, int pad, int groups, bool relu) {
    int y = g_.add(name + ".conv", nn::Conv{channels(x), out, k, stride, pad, groups}, {x});
    if (a_.batch_norm) y = g_.add(name + ".bn", nn::BatchNorm{out}, {y});
    if (relu) y = g_.add(name + ".relu", nn::ReLU{}, {y});
    return y;
  }

  int up(const std::string& name, int x, int out, int target_h, int target_w) {
    const auto& s = g_.node(x).shape;
    int y = g_.add(name + ".tconv",
                   nn::TransConv{s.c, out, 3, 2, 1, out_pad_for(s.h, target_h), out_pad_for(s.w, target_w), 1},
                   {x});
    if (a_.batch_norm) y = g_.add(name + ".bn", nn::BatchNorm{out}, {y});
    return g_.add(name + ".relu", nn::ReLU{}, {y});
  }

  // ResNeXt bottleneck: 1x1 reduce, 3x3 grouped (strided), 1x1 expand, residual add.
  int bottleneck(const std::string& name, int x, int mid, int out, int stride) {
    int y = conv_bn(name + ".reduce", x, mid, 1, 1, 0, 1, true);
    y = conv_bn(name + ".grouped", y, mid, 3, stride, 1, a_.cardinality, true);
    y = conv_bn(name + ".expand", y, out, 1, 1, 0, 1, false);
    int shortcut = x;
    if (stride != 1 || channels(x) != out) shortcut = conv_bn(name + ".proj", x, out, 1, stride, 0, 1, false);
    y = g_.add(name + ".add", nn::Add{}, {y, shortcut});
    return g_.add(name + ".relu", nn::ReLU{}, {y});
  }

 private:
  nn::Graph<T>& g_;
  const ArchConfig& a_;
};

}  // namespace

template <typename T>
Network<T> build(const ArchConfig& arch, Topology topology, int batch) {
  arch.validate();
  if (batch <= 0) throw ConfigError("batch must be > 0");
  Network<T> net;
  net.arch = arch;
  net.topology = topology;
  auto& g = net.graph;
  Builder<T> b(g, arch);
  auto stage = [&](const std::string& name, int node) { net.stages.push_back({name, node}); };

  const int in = g.add_input("input", {batch, dual_in(topology) ? 2 : 1, arch.height, arch.width});

  // Encoder. No max-pool after Conv0, so Res-layer1 keeps the Conv0 resolution.
  int x = b.conv_bn("conv0", in, b.w(kStem), 7, 2, 3, 1, true);
  stage("Conv0", x);
  std::array<int, 4> res{};
  for (int l = 0; l < 4; ++l) {
    const auto [mid, out] = kRes[l];
    for (int i = 0; i < arch.depths[l]; ++i) {
      const int stride = (i == 0 && l > 0) ? 2 : 1;
      x = b.bottleneck("res" + std::to_string(l + 1) + "." + std::to_string(i), x, b.w(mid), b.w(out), stride);
    }
    res[l] = x;
    stage("Res-layer" + std::to_string(l + 1), x);
  }
  x = b.conv_bn("conv5", x, b.w(2048), 3, 1, 1, 1, true);
  stage("Conv5", x);

  // Decoder: up, concatenate the matching encoder stage, two 3x3 convs.
  const std::array<int, 3> skips{res[2], res[1], res[0]};
  for (int i = 0; i < 3; ++i) {
    const std::string up_name = "TransConv" + std::to_string(6 + 2 * i);
    const std::string block_name = "ConvBlock" + std::to_string(7 + 2 * i);
    const auto& skip = g.node(skips[i]).shape;
    x = b.up("tconv" + std::to_string(6 + 2 * i), x, b.w(kDecoder[i]), skip.h, skip.w);
    stage(up_name, x);
    x = g.add("block" + std::to_string(7 + 2 * i) + ".cat", nn::Concat{}, {x, skips[i]});
    x = b.conv_bn("block" + std::to_string(7 + 2 * i) + ".a", x, b.w(kDecoder[i]), 3, 1, 1, 1, true);
    x = b.conv_bn("block" + std::to_string(7 + 2 * i) + ".b", x, b.w(kDecoder[i]), 3, 1, 1, 1, true);
    stage(block_name, x);
  }

  // Heads: the last three blocks are duplicated for two-output topologies.
  const std::vector<std::string> heads =
      dual_out(topology) ? std::vector<std::string>{"area", "angle"} : std::vector<std::string>{"area"};
  std::vector<int> outputs;
  for (const auto& h : heads) {
    const std::string sfx = heads.size() > 1 ? "/" + h : "";
    int y = b.up(h + ".tconv12", x, b.w(kHeadUp), arch.height, arch.width);
    stage("TransConv12" + sfx, y);
    y = b.conv_bn(h + ".block13.a", y, b.w(kHead), 3, 1, 1, 1, true);
    y = b.conv_bn(h + ".block13.b", y, b.w(kHead), 3, 1, 1, 1, true);
    stage("ConvBlock13" + sfx, y);
    y = g.add(h + ".conv14", nn::Conv{b.channels(y), 1, 1, 1, 0, 1}, {y});
    stage("Conv14" + sfx, y);
    if (net.logit_node < 0) net.logit_node = y;
    outputs.push_back(g.add(h + ".sigmoid", nn::Sigmoid{}, {y}));
  }
  g.set_outputs(outputs);
  return net;
}

template Network<float> build<float>(const ArchConfig&, Topology, int);
template Network<double> build<double>(const ArchConfig&, Topology, int);

}  // namespace venibot::model
