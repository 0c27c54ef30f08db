#include "agrissl/augment.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace agrissl {

// ---------------------------------------------------------------------------
// Affine

AffineParams sample_affine(RandomStream& rng, int width, int height, const AffineRanges& ranges) {
  if (width < 1 || height < 1) throw ParameterError("sample_affine: dimensions must be >= 1");
  AffineParams p;
  p.scale = rng.uniform(ranges.scale_min, ranges.scale_max);
  p.rotation = rng.uniform(-ranges.rotation_max, ranges.rotation_max);
  p.shear_x = rng.uniform(ranges.shear_min, ranges.shear_max);
  p.shear_y = rng.uniform(ranges.shear_min, ranges.shear_max);
  p.t_x = rng.uniform(-ranges.translate * width, ranges.translate * width);
  p.t_y = rng.uniform(-ranges.translate * height, ranges.translate * height);
  return p;
}

Eigen::Matrix2d affine_linear_part(const AffineParams& p) {
  Eigen::Matrix2d rotation;
  const double c = std::cos(p.rotation);
  const double s = std::sin(p.rotation);
  rotation << c, -s, s, c;
  Eigen::Matrix2d shear;
  shear << 1.0, p.shear_x, p.shear_y, 1.0;
  return p.scale * rotation * shear;
}

ImageU8 apply_affine(const ImageU8& img, const AffineParams& p) {
  const Eigen::Matrix2d a = affine_linear_part(p);
  const double det = a.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-12) {
    throw ParameterError("apply_affine: singular linear part");
  }
  const Eigen::Matrix2d inv = a.inverse();
  const Eigen::Vector2d centre(0.5 * (img.width() - 1), 0.5 * (img.height() - 1));
  const Eigen::Vector2d offset = centre + Eigen::Vector2d(p.t_x, p.t_y);
  const Rgb fill = channel_mean(img);

  ImageU8 out(img.width(), img.height());
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Eigen::Vector2d src = inv * (Eigen::Vector2d(u, v) - offset) + centre;
      const Rgb px = bilinear_sample(img, src.x(), src.y(), fill);
      for (int c = 0; c < 3; ++c) out.at(u, v, c) = to_byte(px[c]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Color jitter

ColorJitterParams sample_color_jitter(RandomStream& rng, const ColorJitterRanges& r) {
  ColorJitterParams p;
  p.brightness = rng.uniform(r.brightness_min, r.brightness_max);
  p.contrast = rng.uniform(r.contrast_min, r.contrast_max);
  p.saturation = rng.uniform(r.saturation_min, r.saturation_max);
  p.hue = rng.uniform(r.hue_min, r.hue_max);
  return p;
}

namespace {

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

}  // namespace

Rgb rotate_hue(const Rgb& rgb, double turns) {
  const auto [r, g, b] = rgb;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double chroma = mx - mn;
  if (!(chroma > 0.0)) return rgb;

  double h;
  if (mx == r) {
    h = (g - b) / chroma;
  } else if (mx == g) {
    h = (b - r) / chroma + 2.0;
  } else {
    h = (r - g) / chroma + 4.0;
  }
  h = std::fmod(h + 6.0 * turns, 6.0);
  if (h < 0.0) h += 6.0;
  if (h >= 6.0) h = 0.0;

  const double x = chroma * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  Rgb out;
  switch (static_cast<int>(h)) {
    case 0: out = {chroma, x, 0.0}; break;
    case 1: out = {x, chroma, 0.0}; break;
    case 2: out = {0.0, chroma, x}; break;
    case 3: out = {0.0, x, chroma}; break;
    case 4: out = {x, 0.0, chroma}; break;
    default: out = {chroma, 0.0, x}; break;
  }
  for (auto& c : out) c += mn;
  return out;
}

ImageU8 color_jitter(const ImageU8& img, const ColorJitterParams& p) {
  const std::size_t n = img.pixel_count();
  std::vector<Rgb> px(n);
  const auto src = img.data();
  double mean_luma = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) px[i][c] = src[3 * i + c] * p.brightness;
    mean_luma += luma(px[i][0], px[i][1], px[i][2]);
  }
  mean_luma /= static_cast<double>(n);

  ImageU8 out(img.width(), img.height());
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    Rgb v = px[i];
    for (auto& c : v) c = mean_luma + p.contrast * (c - mean_luma);
    const double l = luma(v[0], v[1], v[2]);
    for (auto& c : v) c = l + p.saturation * (c - l);
    if (p.hue != 0.0) v = rotate_hue(v, p.hue);
    for (int c = 0; c < 3; ++c) dst[3 * i + c] = to_byte(v[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian blur

double sample_blur_sigma(RandomStream& rng, const BlurRanges& ranges) {
  return rng.uniform(ranges.sigma_min, ranges.sigma_max);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("gaussian_blur: sigma must be > 0");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += taps[k + radius];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

ImageU8 gaussian_blur(const ImageU8& img, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = img.width();
  const int h = img.height();

  std::vector<double> horiz(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[k + radius] * img.at(std::clamp(x + k, 0, w - 1), y, c);
        }
        horiz[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
    }
  }
  ImageU8 out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, h - 1);
          acc += taps[k + radius] * horiz[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
        }
        out.at(x, y, c) = to_byte(acc);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mixing

ImageU8 mixing(const ImageU8& img, RandomStream& rng) {
  const int w = img.width();
  const int h = img.height();
  ImageU8 out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      int su = u;
      int sv = v;
      switch (rng.uniform_index(3)) {
        case 1: su = w - 1 - u; break;  // flip_x(I) at (u, v)
        case 2: sv = h - 1 - v; break;  // flip_y(I) at (u, v)
        default: break;
      }
      for (int c = 0; c < 3; ++c) out.at(u, v, c) = img.at(su, sv, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random erasing

ErasingResult random_erasing_detailed(const ImageU8& img, RandomStream& rng,
                                      const ErasingConfig& cfg) {
  if (!(cfg.min_fraction > 0.0 && cfg.min_fraction < 0.5)) {
    throw ParameterError("random_erasing: min_fraction must lie in (0, 0.5)");
  }
  if (!(cfg.area_min > 0.0 && cfg.area_min <= cfg.area_max && cfg.area_max <= 1.0)) {
    throw ParameterError("random_erasing: need 0 < area_min <= area_max <= 1");
  }
  if (!(cfg.aspect_min > 0.0 && cfg.aspect_min <= cfg.aspect_max)) {
    throw ParameterError("random_erasing: need 0 < aspect_min <= aspect_max");
  }
  if (cfg.max_rectangles < 1) throw ParameterError("random_erasing: max_rectangles must be >= 1");

  const int w = img.width();
  const int h = img.height();
  const double total = static_cast<double>(img.pixel_count());
  ErasingResult res{img, VegetationMask(w, h), {}, 0.0};
  std::size_t covered = 0;

  while (static_cast<int>(res.rectangles.size()) < cfg.max_rectangles &&
         static_cast<double>(covered) / total < cfg.min_fraction) {
    const double area = rng.uniform(cfg.area_min, cfg.area_max) * total;
    const double aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    ErasedRect r;
    r.width = std::clamp(static_cast<int>(std::floor(std::sqrt(area * aspect))), 1, w);
    r.height = std::clamp(static_cast<int>(std::floor(std::sqrt(area / aspect))), 1, h);
    r.x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(w - r.width + 1)));
    r.y = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(h - r.height + 1)));
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          res.image.at(x, y, c) = static_cast<std::uint8_t>(rng.uniform_index(256));
        }
        if (!res.coverage.at(x, y)) {
          res.coverage.at(x, y) = 1;
          ++covered;
        }
      }
    }
    res.rectangles.push_back(r);
  }
  res.covered_fraction = static_cast<double>(covered) / total;
  return res;
}

ImageU8 random_erasing(const ImageU8& img, RandomStream& rng, double min_fraction) {
  ErasingConfig cfg;
  cfg.min_fraction = min_fraction;
  return random_erasing_detailed(img, rng, cfg).image;
}

ImageU8 random_erasing(const ImageU8& img, RandomStream& rng, const ErasingConfig& cfg) {
  return random_erasing_detailed(img, rng, cfg).image;
}

// ---------------------------------------------------------------------------
// Background invariance

SoilBank build_soil_bank(const std::vector<ImageU8>& images, double theta, double max_fraction) {
  SoilBank bank;
  for (const auto& img : images) {
    if (vegetation_fraction(vegetation_mask(img, theta)) < max_fraction) {
      bank.images.push_back(img);
    }
  }
  return bank;
}

BackgroundResult background_invariance_detailed(const ImageU8& img, const SoilBank& bank,
                                                RandomStream& rng, const BackgroundConfig& cfg) {
  if (bank.empty()) throw ConfigError("background_invariance: soil bank is empty");
  const int w = img.width();
  const int h = img.height();

  BackgroundResult res;
  res.mask = vegetation_mask(img, cfg.theta);
  res.soil_index = static_cast<std::size_t>(rng.uniform_index(bank.size()));
  res.soil = resize_bilinear(bank.images[res.soil_index], w, h);
  res.dx = static_cast<int>(std::lround(rng.uniform(-cfg.translate * w, cfg.translate * w)));
  res.dy = static_cast<int>(std::lround(rng.uniform(-cfg.translate * h, cfg.translate * h)));

  res.image = res.soil;
  for (int v = 0; v < h; ++v) {
    const int tv = v + res.dy;
    if (tv < 0 || tv >= h) continue;
    for (int u = 0; u < w; ++u) {
      const int tu = u + res.dx;
      if (tu < 0 || tu >= w || !res.mask.at(u, v)) continue;
      for (int c = 0; c < 3; ++c) res.image.at(tu, tv, c) = img.at(u, v, c);
    }
  }
  return res;
}

ImageU8 background_invariance(const ImageU8& img, const SoilBank& bank, RandomStream& rng,
                              double theta) {
  BackgroundConfig cfg;
  cfg.theta = theta;
  return background_invariance_detailed(img, bank, rng, cfg).image;
}

}  // namespace agrissl
