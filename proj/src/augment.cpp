#include "venibot/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "venibot/errors.hpp"
#include "venibot/geometry.hpp"

namespace venibot::augment {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

bool range_ok(Range r) { return r.lo <= r.hi; }

// Maps output pixel centres back to source coordinates through
// rotate^-1 -> resize^-1 -> crop offset -> flip^-1.
struct InverseMap {
  const TransformDraw& t;
  int src_w;
  int src_h;
  double cosa, sina, cu, cv;

  InverseMap(const TransformDraw& draw, int w, int h)
      : t(draw), src_w(w), src_h(h), cosa(std::cos(draw.rotation_deg / kDeg)), sina(std::sin(draw.rotation_deg / kDeg)),
        cu(0.5 * (draw.out_width - 1)), cv(0.5 * (draw.out_height - 1)) {}

  // Returns false for exposed corners that have no source.
  bool operator()(int u, int v, double& xs, double& ys) const {
    const double du = u - cu, dv = v - cv;
    // A counter-clockwise screen rotation is (x,y) -> (x cos + y sin, -x sin + y cos)
    // in y-down image coordinates; this is its inverse.
    const double xr = cosa * du - sina * dv + cu;
    const double yr = sina * du + cosa * dv + cv;
    if (xr < -0.5 || yr < -0.5 || xr > t.out_width - 0.5 || yr > t.out_height - 0.5) return false;
    const double xc = t.crop_x + (xr + 0.5) * t.crop_w / t.out_width - 0.5;
    const double yc = t.crop_y + (yr + 0.5) * t.crop_h / t.out_height - 0.5;
    xs = t.hflip ? (src_w - 1) - xc : xc;
    ys = t.vflip ? (src_h - 1) - yc : yc;
    return true;
  }

  // Forward map of a source pixel centre; false when it lands outside the frame.
  bool forward(int x, int y) const {
    const double xc = t.hflip ? (src_w - 1) - x : x;
    const double yc = t.vflip ? (src_h - 1) - y : y;
    const double xr = (xc - t.crop_x + 0.5) * t.out_width / t.crop_w - 0.5;
    const double yr = (yc - t.crop_y + 0.5) * t.out_height / t.crop_h - 0.5;
    if (xr < -0.5 || yr < -0.5 || xr > t.out_width - 0.5 || yr > t.out_height - 0.5) return false;
    const double du = xr - cu, dv = yr - cv;
    const double u = cosa * du + sina * dv + cu;
    const double v = -sina * du + cosa * dv + cv;
    return u >= -0.5 && v >= -0.5 && u <= t.out_width - 0.5 && v <= t.out_height - 0.5;
  }
};

double bilinear(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

bool nearest(int w, int h, double x, double y, int& xi, int& yi) {
  xi = static_cast<int>(std::lround(x));
  yi = static_cast<int>(std::lround(y));
  xi = std::clamp(xi, 0, w - 1);
  yi = std::clamp(yi, 0, h - 1);
  return true;
}

}  // namespace

void AugmentPolicy::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_vflip) || !prob(p_hflip)) throw ParameterError("flip probabilities must lie in [0,1]");
  if (!range_ok(crop_scale) || crop_scale.lo <= 0.0 || crop_scale.hi > 1.0)
    throw ParameterError("crop scale range must lie in (0,1]");
  if (!range_ok(aspect_ratio) || aspect_ratio.lo <= 0.0) throw ParameterError("aspect ratio range must be positive");
  if (out_width < 2 || out_height < 2) throw ParameterError("output size must be at least 2x2");
  if (!range_ok(rotation_deg)) throw ParameterError("rotation range is empty");
  for (const Range r : {brightness, contrast, saturation})
    if (!range_ok(r) || r.lo < 0.0) throw ParameterError("intensity gain ranges must be non-negative");
}

TransformDraw TransformDraw::identity(int width, int height) {
  TransformDraw t;
  t.crop_w = width;
  t.crop_h = height;
  t.out_width = width;
  t.out_height = height;
  return t;
}

TransformDraw draw_transform(const AugmentPolicy& policy, Rng& rng, int src_width, int src_height) {
  policy.validate();
  TransformDraw t;
  t.out_width = policy.out_width;
  t.out_height = policy.out_height;
  t.vflip = rng.bernoulli(policy.p_vflip);
  t.hflip = rng.bernoulli(policy.p_hflip);

  const double area = static_cast<double>(src_width) * src_height;
  const double log_lo = std::log(policy.aspect_ratio.lo), log_hi = std::log(policy.aspect_ratio.hi);
  bool placed = false;
  int degenerate = 0;
  for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
    const double target = area * rng.uniform(policy.crop_scale.lo, policy.crop_scale.hi);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const int cw = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int ch = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (cw < 2 || ch < 2) {
      ++degenerate;
      continue;
    }
    if (cw > src_width || ch > src_height) continue;
    t.crop_w = cw;
    t.crop_h = ch;
    t.crop_x = rng.uniform_int(0, src_width - cw);
    t.crop_y = rng.uniform_int(0, src_height - ch);
    placed = true;
  }
  if (!placed) {
    if (degenerate == 10 || src_width < 2 || src_height < 2)
      throw DataError("augment: crop window degenerate after 10 attempts");
    // Nothing fitted: fall back to the whole frame.
    t.crop_x = t.crop_y = 0.0;
    t.crop_w = src_width;
    t.crop_h = src_height;
  }
  t.rotation_deg = rng.uniform(policy.rotation_deg.lo, policy.rotation_deg.hi);
  t.brightness = rng.uniform(policy.brightness.lo, policy.brightness.hi);
  t.contrast = rng.uniform(policy.contrast.lo, policy.contrast.hi);
  t.saturation = rng.uniform(policy.saturation.lo, policy.saturation.hi);
  return t;
}

double transform_phi(double phi_deg, const TransformDraw& t) {
  double phi = phi_deg;
  if (t.hflip) phi = -phi;
  if (t.vflip) phi = -phi;
  const double r = phi / kDeg;
  phi = std::atan2(t.scale_y() * std::sin(r), t.scale_x() * std::cos(r)) * kDeg;
  return geometry::wrap_axis_deg(phi + t.rotation_deg);
}

GrayImage intensity_jitter(const GrayImage& img, double brightness, double contrast, double saturation) {
  (void)saturation;  // single channel: no chroma to scale
  GrayImage out = img;
  auto px = out.pixels();
  for (auto& v : px) v *= brightness;
  if (!px.empty() && contrast != 1.0) {
    double mean = 0.0;
    for (double v : px) mean += v;
    mean /= static_cast<double>(px.size());
    for (auto& v : px) v = (v - mean) * contrast + mean;
  }
  out.clamp01();
  return out;
}

AugmentedSample apply(const TransformDraw& t, const synth::SyntheticSample& sample) {
  const int sw = sample.image.width(), sh = sample.image.height();
  if (sw < 1 || sh < 1) throw DataError("augment: empty sample");
  if (t.crop_w < 1.0 || t.crop_h < 1.0 || t.out_width < 1 || t.out_height < 1)
    throw ParameterError("augment: invalid transform");
  const int ow = t.out_width, oh = t.out_height;
  const InverseMap map(t, sw, sh);
  const bool have_labels = sample.target_labels.size() == static_cast<std::size_t>(sw) * sh;

  AugmentedSample out;
  out.draw = t;
  GrayImage img(ow, oh, 0.0);
  out.vein = BinaryMask(ow, oh);
  out.suitable = BinaryMask(ow, oh);
  std::vector<int> labels(static_cast<std::size_t>(ow) * oh, 0);
  for (int v = 0; v < oh; ++v)
    for (int u = 0; u < ow; ++u) {
      double xs = 0.0, ys = 0.0;
      if (!map(u, v, xs, ys)) continue;
      img.at(u, v) = bilinear(sample.image, xs, ys);
      int xi = 0, yi = 0;
      nearest(sw, sh, xs, ys, xi, yi);
      out.vein.set(u, v, sample.vein_gt.at(xi, yi));
      out.suitable.set(u, v, sample.suitable_gt.at(xi, yi));
      if (have_labels) labels[static_cast<std::size_t>(v) * ow + u] = sample.target_labels[static_cast<std::size_t>(yi) * sw + xi];
    }
  out.image = intensity_jitter(img, t.brightness, t.contrast, t.saturation);

  // Re-measure centroids, renumber surviving targets, flag truncated ones.
  const std::size_t nt = sample.targets.size();
  std::vector<double> sx(nt + 1, 0.0), sy(nt + 1, 0.0);
  std::vector<long> count(nt + 1, 0);
  for (int v = 0; v < oh; ++v)
    for (int u = 0; u < ow; ++u) {
      const int l = labels[static_cast<std::size_t>(v) * ow + u];
      if (l <= 0 || static_cast<std::size_t>(l) > nt) continue;
      sx[l] += u;
      sy[l] += v;
      ++count[l];
    }
  std::vector<bool> truncated(nt + 1, false);
  if (have_labels)
    for (int y = 0; y < sh; ++y)
      for (int x = 0; x < sw; ++x) {
        const int l = sample.target_labels[static_cast<std::size_t>(y) * sw + x];
        if (l > 0 && static_cast<std::size_t>(l) <= nt && !truncated[l] && !map.forward(x, y)) truncated[l] = true;
      }
  std::vector<int> renumber(nt + 1, 0);
  for (std::size_t k = 1; k <= nt; ++k) {
    if (count[k] == 0) continue;
    synth::Target tg = sample.targets[k - 1];
    tg.phi_deg = transform_phi(tg.phi_deg, t);
    const double r = sample.targets[k - 1].phi_deg / kDeg;
    tg.length_px *= std::hypot(t.scale_x() * std::cos(r), t.scale_y() * std::sin(r));
    tg.cx = sx[k] / count[k];
    tg.cy = sy[k] / count[k];
    out.targets.push_back(tg);
    out.source_index.push_back(static_cast<int>(k) - 1);
    out.truncated.push_back(truncated[k]);
    renumber[k] = static_cast<int>(out.targets.size());
  }
  for (auto& l : labels) l = (l > 0 && static_cast<std::size_t>(l) <= nt) ? renumber[l] : 0;
  out.target_labels = std::move(labels);
  return out;
}

AugmentedSample apply(const AugmentPolicy& policy, const synth::SyntheticSample& sample, Rng& rng) {
  return apply(draw_transform(policy, rng, sample.image.width(), sample.image.height()), sample);
}

Augmenter::Augmenter(AugmentPolicy policy) : policy_(policy) { policy_.validate(); }

AugmentedSample Augmenter::next(const synth::SyntheticSample& sample) {
  Rng rng(derive_seed(policy_.seed, count_++));
  return apply(policy_, sample, rng);
}

}  // namespace venibot::augment
