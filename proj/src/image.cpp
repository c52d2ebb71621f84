#include "venibot/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "venibot/errors.hpp"

namespace venibot {

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ParameterError("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw ParameterError("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height)
    throw ParameterError("image data length does not match width*height");
}

void GrayImage::clamp01() {
  for (auto& v : data_) v = std::clamp(v, 0.0, 1.0);
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ParameterError("mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (!same_size(other)) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

GrayImage BinaryMask::to_image() const {
  GrayImage img(width_, height_);
  auto px = img.pixels();
  for (std::size_t i = 0; i < bits_.size(); ++i) px[i] = bits_[i] ? 1.0 : 0.0;
  return img;
}

namespace {

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
  if (!a.same_size(b)) throw ParameterError("mask dimensions differ");
  BinaryMask out(a.width(), a.height());
  auto o = out.bits();
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]) ? 1 : 0;
  return out;
}

template <typename Raster, typename Map>
Raster remap(const Raster& src, int out_w, int out_h, Map map) {
  Raster out(out_w, out_h);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      auto [sx, sy] = map(x, y);
      if constexpr (std::is_same_v<Raster, BinaryMask>)
        out.set(x, y, src.at(sx, sy));
      else
        out.at(x, y) = src.at(sx, sy);
    }
  return out;
}

}  // namespace

BinaryMask operator&(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto p, auto q) { return p && q; });
}
BinaryMask operator|(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto p, auto q) { return p || q; });
}

BinaryMask flip_horizontal(const BinaryMask& m) {
  const int w = m.width();
  return remap(m, w, m.height(), [w](int x, int y) { return std::pair{w - 1 - x, y}; });
}
BinaryMask flip_vertical(const BinaryMask& m) {
  const int h = m.height();
  return remap(m, m.width(), h, [h](int x, int y) { return std::pair{x, h - 1 - y}; });
}
BinaryMask rotate180(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  return remap(m, w, h, [w, h](int x, int y) { return std::pair{w - 1 - x, h - 1 - y}; });
}
GrayImage flip_horizontal(const GrayImage& img) {
  const int w = img.width();
  return remap(img, w, img.height(), [w](int x, int y) { return std::pair{w - 1 - x, y}; });
}
GrayImage flip_vertical(const GrayImage& img) {
  const int h = img.height();
  return remap(img, img.width(), h, [h](int x, int y) { return std::pair{x, h - 1 - y}; });
}
GrayImage rotate90(const GrayImage& img) {
  const int h = img.height();
  // output pixel (x,y) comes from source (y, h-1-x)
  return remap(img, h, img.width(), [h](int x, int y) { return std::pair{y, h - 1 - x}; });
}

GrayImage downsample2(const GrayImage& img) {
  const int w = std::max(1, img.width() / 2), h = std::max(1, img.height() / 2);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          if (img.contains(2 * x + dx, 2 * y + dy)) {
            s += img.at(2 * x + dx, 2 * y + dy);
            ++n;
          }
      out.at(x, y) = s / n;
    }
  return out;
}

BinaryMask downsample2(const BinaryMask& m) {
  const int w = std::max(1, m.width() / 2), h = std::max(1, m.height() / 2);
  return remap(m, w, h, [](int x, int y) { return std::pair{2 * x, 2 * y}; });
}

namespace {

cv::Mat read_gray8(const std::filesystem::path& path) {
  cv::Mat m;
  try {
    m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  } catch (const cv::Exception& e) {
    throw IoError("cannot decode image " + path.string() + ": " + e.what());
  }
  if (m.empty()) throw IoError("cannot read image " + path.string());
  return m;
}

void write_gray8(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write image " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write image " + path.string());
}

}  // namespace

GrayImage read_image(const std::filesystem::path& path) {
  cv::Mat m = read_gray8(path);
  GrayImage img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) img.at(x, y) = m.at<std::uint8_t>(y, x) / 255.0;
  return img;
}

BinaryMask read_mask(const std::filesystem::path& path) {
  cv::Mat m = read_gray8(path);
  BinaryMask mask(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) mask.set(x, y, m.at<std::uint8_t>(y, x) >= 128);
  return mask;
}

void write_image(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      m.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
  write_gray8(path, m);
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) m.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
  write_gray8(path, m);
}

}  // namespace venibot
