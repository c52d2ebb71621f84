#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace venibot {

/// Row-major single-channel intensity raster with values in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }

  void clamp01();
  bool operator==(const GrayImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Row-major boolean raster.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool get_or(int x, int y, bool fallback) const { return contains(x, y) ? at(x, y) : fallback; }

  std::span<std::uint8_t> bits() noexcept { return bits_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  /// True when every set pixel of *this is also set in `other`.
  bool subset_of(const BinaryMask& other) const;
  bool same_size(const BinaryMask& other) const { return width_ == other.width_ && height_ == other.height_; }

  GrayImage to_image() const;
  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

BinaryMask operator&(const BinaryMask& a, const BinaryMask& b);
BinaryMask operator|(const BinaryMask& a, const BinaryMask& b);

BinaryMask flip_horizontal(const BinaryMask& m);
BinaryMask flip_vertical(const BinaryMask& m);
BinaryMask rotate180(const BinaryMask& m);
GrayImage flip_horizontal(const GrayImage& img);
GrayImage flip_vertical(const GrayImage& img);
/// Rotate by 90 degrees clockwise on screen; output is height x width.
GrayImage rotate90(const GrayImage& img);

/// 2x box downsampling for images, nearest (top-left) sampling for masks.
GrayImage downsample2(const GrayImage& img);
BinaryMask downsample2(const BinaryMask& m);

// 8-bit single-channel PNG or binary PGM (P5); format picked from the extension.
// Intensities map linearly 0..255 <-> [0,1]; masks are stored as {0,255}.
GrayImage read_image(const std::filesystem::path& path);
BinaryMask read_mask(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const GrayImage& img);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace venibot
