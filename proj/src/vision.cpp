#include "venibot/vision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "venibot/errors.hpp"

namespace venibot::vision {

void LabelPipelineParams::validate() const {
  if (!(gaussian_sigma > 0.0)) throw ParameterError("gaussian_sigma must be > 0");
  if (erode_radius < 1 || dilate_radius < 1) throw ParameterError("morphology radii must be >= 1");
  if (!(brightness_gain > 0.0)) throw ParameterError("brightness_gain must be > 0");
  if (vesselness_scales.empty()) throw ParameterError("vesselness scale list is empty");
  for (double s : vesselness_scales)
    if (!(s > 0.0)) throw ParameterError("vesselness scales must be > 0");
  if (!(vesselness_beta > 0.0)) throw ParameterError("vesselness_beta must be > 0");
  if (!(vesselness_c_fraction > 0.0)) throw ParameterError("vesselness_c_fraction must be > 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("threshold must lie in (0,1)");
  if (min_component_area < 0) throw ParameterError("min_component_area must be >= 0");
}

BinaryMask ComponentSet::mask_of(int id) const {
  BinaryMask m(width, height);
  auto bits = m.bits();
  for (std::size_t i = 0; i < labels.size(); ++i) bits[i] = labels[i] == id ? 1 : 0;
  return m;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + r];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable correlation with border replication: kx along rows, ky along columns.
std::vector<double> separable(const std::vector<double>& src, int w, int h,
                              const std::vector<double>& kx, const std::vector<double>& ky) {
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
#pragma omp parallel for
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -rx; i <= rx; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        s += kx[i + rx] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
#pragma omp parallel for
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -ry; i <= ry; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        s += ky[i + ry] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> off;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) off.emplace_back(dx, dy);
  return off;
}

// Min/max filter. Pixels outside the raster count as 0: erosion clears the
// border ring, dilation is unaffected for non-negative data.
std::vector<double> minmax_filter(std::span<const double> src, int w, int h, MorphOp op,
                                  int radius) {
  std::vector<double> out(src.begin(), src.end());
  if (radius == 0) return out;
  const auto off = disk_offsets(radius);
  const bool erode = op == MorphOp::kErode;
#pragma omp parallel for
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = erode ? std::numeric_limits<double>::infinity() : 0.0;
      for (auto [dx, dy] : off) {
        const int xx = x + dx, yy = y + dy;
        const double v = (xx < 0 || yy < 0 || xx >= w || yy >= h)
                             ? 0.0
                             : src[static_cast<std::size_t>(yy) * w + xx];
        acc = erode ? std::min(acc, v) : std::max(acc, v);
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_blur: sigma must be > 0");
  const auto k = gaussian_kernel(sigma);
  std::vector<double> src(img.pixels().begin(), img.pixels().end());
  GrayImage out(img.width(), img.height(), separable(src, img.width(), img.height(), k, k));
  out.clamp01();
  return out;
}

GrayImage morph(const GrayImage& img, MorphOp op, int radius) {
  if (radius < 0) throw ParameterError("morph: radius must be >= 0");
  return GrayImage(img.width(), img.height(),
                   minmax_filter(img.pixels(), img.width(), img.height(), op, radius));
}

BinaryMask morph(const BinaryMask& mask, MorphOp op, int radius) {
  if (radius < 0) throw ParameterError("morph: radius must be >= 0");
  std::vector<double> src(mask.size());
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = mask.bits()[i];
  const auto res = minmax_filter(src, mask.width(), mask.height(), op, radius);
  BinaryMask out(mask.width(), mask.height());
  auto bits = out.bits();
  for (std::size_t i = 0; i < res.size(); ++i) bits[i] = res[i] > 0.5 ? 1 : 0;
  return out;
}

GrayImage histogram_normalize(const GrayImage& img) {
  const auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  GrayImage out(img.width(), img.height(), 0.0);
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  auto o = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) o[i] = std::clamp((px[i] - *lo) / range, 0.0, 1.0);
  return out;
}

GrayImage invert(const GrayImage& img) {
  GrayImage out = img;
  for (auto& v : out.pixels()) v = 1.0 - v;
  return out;
}

GrayImage hessian_vesselness(const GrayImage& img, const LabelPipelineParams& params) {
  if (params.vesselness_scales.empty()) throw ParameterError("hessian_vesselness: empty scale list");
  const int w = img.width(), h = img.height();
  const std::size_t n = img.size();
  std::vector<double> src(img.pixels().begin(), img.pixels().end());
  std::vector<double> best(n, 0.0);
  const double two_beta_sq = 2.0 * params.vesselness_beta * params.vesselness_beta;
  // Dark tubes have a positive second derivative across the vessel.
  const double sign = params.polarity == VesselPolarity::kDarkOnBright ? 1.0 : -1.0;

  for (double sigma : params.vesselness_scales) {
    if (!(sigma > 0.0)) throw ParameterError("hessian_vesselness: scale must be > 0");
    const auto g = gaussian_kernel(sigma);
    const int r = static_cast<int>(g.size() / 2);
    std::vector<double> d1(g.size()), d2(g.size());
    // d1 satisfies sum(-i * d1[i]) = 1 and d2 is zero-mean with sum(i^2/2 * d2[i]) = 1,
    // so both differentiate low-order polynomials exactly.
    double m1 = 0.0, mean2 = 0.0;
    for (int i = -r; i <= r; ++i) {
      d1[i + r] = -i / (sigma * sigma) * g[i + r];
      d2[i + r] = (i * i / (sigma * sigma) - 1.0) / (sigma * sigma) * g[i + r];
      mean2 += d2[i + r];
    }
    mean2 /= static_cast<double>(g.size());
    double m2 = 0.0;
    for (int i = -r; i <= r; ++i) {
      d2[i + r] -= mean2;
      m1 += -i * d1[i + r];
      m2 += 0.5 * i * i * d2[i + r];
    }
    // Correlation flips the sign of odd kernels; fold that into d1.
    for (auto& v : d1) v /= -m1;
    for (auto& v : d2) v /= m2;

    const auto hxx = separable(src, w, h, d2, g);
    const auto hyy = separable(src, w, h, g, d2);
    const auto hxy = separable(src, w, h, d1, d1);
    const double norm = sigma * sigma;

    std::vector<double> l1(n), l2(n), frob(n);
    double max_frob = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = norm * hxx[i], b = norm * hxy[i], d = norm * hyy[i];
      const double tr = 0.5 * (a + d);
      const double disc = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
      double e1 = tr - disc, e2 = tr + disc;
      if (std::abs(e1) > std::abs(e2)) std::swap(e1, e2);
      l1[i] = e1;
      l2[i] = e2;
      frob[i] = std::sqrt(e1 * e1 + e2 * e2);
      max_frob = std::max(max_frob, frob[i]);
    }
    if (max_frob < 1e-10) continue;  // no second-order structure at this scale
    const double c = params.vesselness_c_fraction * max_frob;
    const double two_c_sq = 2.0 * c * c;
    for (std::size_t i = 0; i < n; ++i) {
      if (sign * l2[i] <= 0.0) continue;
      const double rb = l1[i] / l2[i];
      const double v = std::exp(-rb * rb / two_beta_sq) * (1.0 - std::exp(-frob[i] * frob[i] / two_c_sq));
      best[i] = std::max(best[i], v);
    }
  }
  const double peak = *std::max_element(best.begin(), best.end());
  if (peak > 0.0)
    for (auto& v : best) v /= peak;
  return GrayImage(w, h, std::move(best));
}

BinaryMask binarize(const GrayImage& img, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("binarize: threshold must lie in (0,1)");
  BinaryMask out(img.width(), img.height());
  auto bits = out.bits();
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) bits[i] = px[i] >= threshold ? 1 : 0;
  return out;
}

ComponentSet connected_components(const BinaryMask& mask) {
  ComponentSet cs;
  cs.width = mask.width();
  cs.height = mask.height();
  cs.labels.assign(mask.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < cs.height; ++y)
    for (int x = 0; x < cs.width; ++x) {
      if (!mask.at(x, y) || cs.label(x, y) != 0) continue;
      ComponentStats st;
      st.id = cs.count() + 1;
      st.min_x = st.max_x = x;
      st.min_y = st.max_y = y;
      double sx = 0.0, sy = 0.0;
      stack.assign(1, {x, y});
      cs.labels[static_cast<std::size_t>(y) * cs.width + x] = st.id;
      while (!stack.empty()) {
        auto [px, py] = stack.back();
        stack.pop_back();
        ++st.area;
        sx += px;
        sy += py;
        st.min_x = std::min(st.min_x, px);
        st.max_x = std::max(st.max_x, px);
        st.min_y = std::min(st.min_y, py);
        st.max_y = std::max(st.max_y, py);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int qx = px + dx, qy = py + dy;
            if (!mask.contains(qx, qy) || !mask.at(qx, qy)) continue;
            auto& l = cs.labels[static_cast<std::size_t>(qy) * cs.width + qx];
            if (l != 0) continue;
            l = st.id;
            stack.emplace_back(qx, qy);
          }
      }
      st.cx = sx / st.area;
      st.cy = sy / st.area;
      cs.stats.push_back(st);
    }
  return cs;
}

BinaryMask drop_small_components(const BinaryMask& mask, int min_area) {
  const auto cs = connected_components(mask);
  BinaryMask out(mask.width(), mask.height());
  auto bits = out.bits();
  for (std::size_t i = 0; i < cs.labels.size(); ++i) {
    const int id = cs.labels[i];
    bits[i] = (id != 0 && cs.stats[id - 1].area >= min_area) ? 1 : 0;
  }
  return out;
}

namespace {

// Opening on a border-replicated copy, so the raster edge does not read as a
// dark frame (plain morph treats outside pixels as 0).
GrayImage open_replicated(const GrayImage& img, int erode_radius, int dilate_radius) {
  const int pad = erode_radius + dilate_radius;
  if (pad == 0) return img;
  const int w = img.width(), h = img.height();
  GrayImage padded(w + 2 * pad, h + 2 * pad);
  for (int y = 0; y < padded.height(); ++y)
    for (int x = 0; x < padded.width(); ++x)
      padded.at(x, y) = img.at(std::clamp(x - pad, 0, w - 1), std::clamp(y - pad, 0, h - 1));
  const GrayImage opened = morph(morph(padded, MorphOp::kErode, erode_radius), MorphOp::kDilate, dilate_radius);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = opened.at(x + pad, y + pad);
  return out;
}

}  // namespace

BinaryMask label_vein(const GrayImage& img, const LabelPipelineParams& params) {
  params.validate();
  GrayImage g = gaussian_blur(img, params.gaussian_sigma);
  // Open in vessel polarity so structures thinner than the element (hairs) vanish.
  const bool dark = params.polarity == VesselPolarity::kDarkOnBright;
  if (dark) g = invert(g);
  g = open_replicated(g, params.erode_radius, params.dilate_radius);
  if (dark) g = invert(g);
  for (auto& v : g.pixels()) v = std::clamp(v * params.brightness_gain, 0.0, 1.0);
  g = histogram_normalize(g);
  const GrayImage vessel = hessian_vesselness(g, params);
  return drop_small_components(binarize(vessel, params.threshold), params.min_component_area);
}

}  // namespace venibot::vision
