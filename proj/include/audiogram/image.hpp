#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "audiogram/errors.hpp"

namespace audiogram {

// Row-major 8-bit raster. ImageT<tag> keeps gray and binary images distinct types.
template <typename Tag>
class ImageT {
 public:
  ImageT() = default;
  ImageT(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ParameterError("image dimensions must be non-negative");
    pixels_.assign(std::size_t(width) * std::size_t(height), fill);
  }
  ImageT(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != std::size_t(width) * std::size_t(height))
      throw ParameterError("pixel buffer length does not match width * height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::uint8_t operator()(int x, int y) const { return pixels_[std::size_t(y) * width_ + x]; }
  std::uint8_t& operator()(int x, int y) { return pixels_[std::size_t(y) * width_ + x]; }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  bool operator==(const ImageT&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

struct GrayTag {};
struct BinaryTag {};

// 0 = black ink, 255 = white paper.
using GrayImage = ImageT<GrayTag>;
// 255 = foreground (dark ink), 0 = background.
using BinaryImage = ImageT<BinaryTag>;

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Bilinear sample with white outside the image.
inline double sample_bilinear(const GrayImage& img, double x, double y, double outside = 255.0) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = int(fx), y0 = int(fy);
  const double ax = x - fx, ay = y - fy;
  auto at = [&](int xi, int yi) { return img.contains(xi, yi) ? double(img(xi, yi)) : outside; };
  if (x0 < -1 || y0 < -1 || x0 >= img.width() || y0 >= img.height()) return outside;
  return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) +
         ay * ((1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1));
}

}  // namespace audiogram
