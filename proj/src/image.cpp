#include "agrissl/image.hpp"

#include <algorithm>

namespace agrissl {

ImageU8 to_bytes(const ImageF32& img) {
  ImageU8 out(img.width(), img.height());
  std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                 [](float v) { return to_byte(v); });
  return out;
}

ImageF32 to_float(const ImageU8& img) {
  ImageF32 out(img.width(), img.height());
  std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

Rgb channel_mean(const ImageU8& img) {
  Rgb sum{0.0, 0.0, 0.0};
  const auto data = img.data();
  for (std::size_t i = 0; i < data.size(); i += 3) {
    for (int c = 0; c < 3; ++c) sum[c] += data[i + c];
  }
  const double n = static_cast<double>(img.pixel_count());
  for (auto& s : sum) s /= n;
  return sum;
}

ImageF32 normalize_image(const ImageU8& img) {
  constexpr double kEps = 1e-8;
  const Rgb mean = channel_mean(img);
  Rgb var{0.0, 0.0, 0.0};
  const auto data = img.data();
  for (std::size_t i = 0; i < data.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      const double d = data[i + c] - mean[c];
      var[c] += d * d;
    }
  }
  Rgb inv{};
  for (int c = 0; c < 3; ++c) {
    inv[c] = 1.0 / (std::sqrt(var[c] / static_cast<double>(img.pixel_count())) + kEps);
  }
  ImageF32 out(img.width(), img.height());
  auto dst = out.data();
  for (std::size_t i = 0; i < data.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      dst[i + c] = static_cast<float>((data[i + c] - mean[c]) * inv[c]);
    }
  }
  return out;
}

ImageU8 resize_bilinear(const ImageU8& img, int width, int height) {
  if (img.width() == width && img.height() == height) return img;
  ImageU8 out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  const Rgb unused{0.0, 0.0, 0.0};
  for (int v = 0; v < height; ++v) {
    const double y = std::clamp((v + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    for (int u = 0; u < width; ++u) {
      const double x = std::clamp((u + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const Rgb p = bilinear_sample(img, x, y, unused);
      for (int c = 0; c < 3; ++c) out.at(u, v, c) = to_byte(p[c]);
    }
  }
  return out;
}

}  // namespace agrissl
