#include "agrissl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace agrissl {

namespace {

// Value noise: random lattice values every `cell` pixels, bilinearly
// interpolated, in [-1, 1].
std::vector<double> value_noise(RandomStream& rng, int width, int height, int cell) {
  const int gw = width / cell + 2;
  const int gh = height / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      auto at = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy) * gw + gx]; };
      const double top = at(x0, y0) * (1 - tx) + at(x0 + 1, y0) * tx;
      const double bottom = at(x0, y0 + 1) * (1 - tx) + at(x0 + 1, y0 + 1) * tx;
      out[static_cast<std::size_t>(y) * width + x] = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

constexpr double kGrainRate = 0.015;
constexpr double kGrainStrength = 40.0;

}  // namespace

ImageU8 synthetic_soil(RandomStream& rng, int width, int height) {
  const Rgb base{rng.uniform(95, 140), rng.uniform(65, 95), rng.uniform(40, 65)};
  const int coarse = std::max(2, std::min(width, height) / 3);
  const int fine = std::max(1, coarse / 2);
  const auto n1 = value_noise(rng, width, height, coarse);
  const auto n2 = value_noise(rng, width, height, fine);
  ImageU8 img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const double shade = 1.0 + 0.22 * n1[i] + 0.12 * n2[i] + rng.uniform(-0.04, 0.04);
      Rgb px{base[0] * shade, base[1] * shade, base[2] * shade};
      // Sparse single-pixel grains: pale green ones and dark red-blue-poor
      // ones. They give every channel the same extra spread while pulling the
      // green excess of the plain soil below zero after normalization.
      const double grain = rng.uniform();
      if (grain < kGrainRate) {
        px[1] += kGrainStrength;
      } else if (grain < 2 * kGrainRate) {
        px[0] -= kGrainStrength;
        px[2] -= kGrainStrength;
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = to_byte(px[c]);
    }
  }
  return img;
}

ImageU8 synthetic_plant(RandomStream& rng, int width, int height) {
  ImageU8 img = synthetic_soil(rng, width, height);
  const int blobs = 1 + static_cast<int>(rng.uniform_index(3));
  const double size = std::min(width, height);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0.15, 0.85) * width;
    const double cy = rng.uniform(0.15, 0.85) * height;
    const double ra = rng.uniform(0.12, 0.30) * size;
    const double rb = rng.uniform(0.08, 0.22) * size;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const Rgb green{rng.uniform(30, 90), rng.uniform(120, 200), rng.uniform(25, 75)};
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double u = (dx * ca + dy * sa) / ra;
        const double v = (-dx * sa + dy * ca) / rb;
        const double r2 = u * u + v * v;
        if (r2 > 1.0) continue;
        const double shade = 1.05 - 0.25 * r2;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = to_byte(green[c] * shade);
      }
    }
  }
  return img;
}

std::vector<ImageU8> synthetic_corpus(std::size_t count, int width, int height, std::uint64_t seed) {
  std::vector<ImageU8> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RandomStream rng(derive_seed(seed, i));
    out.push_back(synthetic_plant(rng, width, height));
  }
  return out;
}

std::vector<ImageU8> synthetic_soil_images(std::size_t count, int width, int height,
                                           std::uint64_t seed) {
  std::vector<ImageU8> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RandomStream rng(derive_seed(seed ^ 0x50494CULL, i));
    out.push_back(synthetic_soil(rng, width, height));
  }
  return out;
}

}  // namespace agrissl
