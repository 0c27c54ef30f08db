#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agrissl/errors.hpp"

namespace agrissl {

using Rgb = std::array<double, 3>;

/// Row-major interleaved 3-channel raster. Width and height are at least 1
/// for every constructed image; a default-constructed image is 0x0 and only
/// serves as a placeholder to be assigned over.
template <typename T>
class Image {
 public:
  using Scalar = T;
  static constexpr int kChannels = 3;

  Image() = default;

  Image(int width, int height, T fill = T{}) : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  Image(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
      throw ShapeError("image data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(width) + "x" + std::to_string(height) + "x3");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  T& at(int x, int y, int c) noexcept { return data_[index(x, y) + c]; }
  const T& at(int x, int y, int c) const noexcept { return data_[index(x, y) + c]; }

  std::span<T, 3> pixel(int x, int y) noexcept { return std::span<T, 3>(&data_[index(x, y)], 3); }
  std::span<const T, 3> pixel(int x, int y) const noexcept {
    return std::span<const T, 3>(&data_[index(x, y)], 3);
  }

  Rgb rgb(int x, int y) const noexcept {
    const std::size_t i = index(x, y);
    return {static_cast<double>(data_[i]), static_cast<double>(data_[i + 1]),
            static_cast<double>(data_[i + 2])};
  }

  bool operator==(const Image&) const = default;

 private:
  static void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
      throw ShapeError("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                       std::to_string(height));
    }
  }
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageU8 = Image<std::uint8_t>;
using ImageF32 = Image<float>;

/// Single-channel raster: masks, label maps, and scalar fields.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ShapeError("plane dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Plane(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) throw ShapeError("plane dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(width) * height) {
      throw ShapeError("plane data length does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  T& at(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  bool operator==(const Plane&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
bool same_shape(const A& a, const B& b) noexcept {
  return a.width() == b.width() && a.height() == b.height();
}

/// Byte conversion used everywhere a real value becomes a pixel: clamp to
/// [0, 255], round half away from zero.
inline std::uint8_t to_byte(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::round(v));
}

ImageU8 to_bytes(const ImageF32& img);
ImageF32 to_float(const ImageU8& img);

/// Per-channel standardization (x - mean) / (std + 1e-8) with population std.
ImageF32 normalize_image(const ImageU8& img);

/// Bilinear interpolation of the four integer neighbours of (x, y).
/// Neighbours outside the image contribute `fill`, so points fully outside
/// [0,w-1]x[0,h-1] return `fill` and partial overlaps blend toward it.
template <typename T>
Rgb bilinear_sample(const Image<T>& img, double x, double y, const Rgb& fill) noexcept {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double ax = x - fx0;
  const double ay = y - fy0;
  if (!(fx0 > -2.0 && fx0 < img.width() && fy0 > -2.0 && fy0 < img.height())) return fill;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double weights[4] = {(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  Rgb out{0.0, 0.0, 0.0};
  for (int k = 0; k < 4; ++k) {
    const bool inside = xs[k] >= 0 && xs[k] < img.width() && ys[k] >= 0 && ys[k] < img.height();
    for (int c = 0; c < 3; ++c) {
      const double v = inside ? static_cast<double>(img.at(xs[k], ys[k], c)) : fill[c];
      out[c] += weights[k] * v;
    }
  }
  return out;
}

/// Mirror about the vertical axis (columns reversed).
template <typename T>
Image<T> flip_x(const Image<T>& img) {
  Image<T> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
    }
  }
  return out;
}

/// Mirror about the horizontal axis (rows reversed).
template <typename T>
Image<T> flip_y(const Image<T>& img) {
  Image<T> out(img.width(), img.height());
  const std::size_t row = static_cast<std::size_t>(img.width()) * 3;
  for (int y = 0; y < img.height(); ++y) {
    const auto src = img.data().subspan(static_cast<std::size_t>(y) * row, row);
    auto dst = out.data().subspan(static_cast<std::size_t>(img.height() - 1 - y) * row, row);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

/// Pixel-centre-aligned bilinear resize with clamp-to-edge. Same-size input
/// is returned unchanged.
ImageU8 resize_bilinear(const ImageU8& img, int width, int height);

/// Per-channel mean over all pixels.
Rgb channel_mean(const ImageU8& img);

}  // namespace agrissl
