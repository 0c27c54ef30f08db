#pragma once

#include <vector>

#include <Eigen/Core>

#include "agrissl/image.hpp"
#include "agrissl/random.hpp"
#include "agrissl/vegmask.hpp"

namespace agrissl {

// ---------------------------------------------------------------------------
// Affine transform
// ---------------------------------------------------------------------------

struct AffineParams {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double shear_x = 0.0;
  double shear_y = 0.0;
  double t_x = 0.0;  // pixels
  double t_y = 0.0;  // pixels
};

struct AffineRanges {
  double scale_min = 0.5, scale_max = 2.0;
  double rotation_max = 3.14159265358979323846;  // symmetric [-max, max]
  double shear_min = 0.25, shear_max = 0.75;
  double translate = 0.25;  // fraction of W (x) and H (y), symmetric
};

/// Draws, in order: scale, rotation, shear_x, shear_y, t_x, t_y.
AffineParams sample_affine(RandomStream& rng, int width, int height,
                           const AffineRanges& ranges = {});

/// Linear part scale * R(rotation) * [[1, shear_x], [shear_y, 1]].
Eigen::Matrix2d affine_linear_part(const AffineParams& p);

/// Warp about the image centre: a source point p lands at A (p - c) + c + t.
/// Output pixels are bilinear samples of the inverse map, filled with the
/// source's per-channel mean where the preimage leaves the image.
ImageU8 apply_affine(const ImageU8& img, const AffineParams& p);

// ---------------------------------------------------------------------------
// Color jitter
// ---------------------------------------------------------------------------

struct ColorJitterParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;  // fraction of a full hue turn
};

struct ColorJitterRanges {
  double brightness_min = 0.6, brightness_max = 1.4;
  double contrast_min = 0.6, contrast_max = 1.4;
  double saturation_min = 0.8, saturation_max = 1.2;
  double hue_min = 0.0, hue_max = 0.125;
};

/// Draws, in order: brightness, contrast, saturation, hue.
ColorJitterParams sample_color_jitter(RandomStream& rng, const ColorJitterRanges& ranges = {});

/// Brightness, contrast (toward mean luma), saturation (toward pixel luma),
/// then hue rotation in HSV. Intermediate values stay real; clamping happens
/// only at the final byte conversion.
ImageU8 color_jitter(const ImageU8& img, const ColorJitterParams& p);

/// Hue rotation that keeps each pixel's max and min channel, i.e. HSV with
/// V and chroma preserved. Defined for any real inputs.
Rgb rotate_hue(const Rgb& rgb, double turns);

// ---------------------------------------------------------------------------
// Gaussian blur
// ---------------------------------------------------------------------------

struct BlurRanges {
  double sigma_min = 0.1, sigma_max = 2.0;
};

double sample_blur_sigma(RandomStream& rng, const BlurRanges& ranges = {});

/// Normalized taps for offsets -r..r with r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable blur, horizontal then vertical, clamp-to-edge borders.
ImageU8 gaussian_blur(const ImageU8& img, double sigma);

// ---------------------------------------------------------------------------
// Mixing
// ---------------------------------------------------------------------------

/// Per pixel in row-major order, one draw k in {0,1,2} selects the pixel of
/// I, flip_x(I) or flip_y(I) at that coordinate.
ImageU8 mixing(const ImageU8& img, RandomStream& rng);

// ---------------------------------------------------------------------------
// Random erasing
// ---------------------------------------------------------------------------

struct ErasingConfig {
  double min_fraction = 0.10;
  double area_min = 0.01, area_max = 0.08;
  double aspect_min = 0.3, aspect_max = 3.3;
  int max_rectangles = 100;
};

struct ErasedRect {
  int x = 0, y = 0, width = 0, height = 0;
};

struct ErasingResult {
  ImageU8 image;
  VegetationMask coverage;  // 1 where at least one rectangle landed
  std::vector<ErasedRect> rectangles;
  double covered_fraction = 0.0;
};

/// Rectangles are drawn as (area fraction, aspect, x, y) followed by one
/// uniform byte per covered channel in row-major order. Side lengths are
/// floored, so no single rectangle exceeds area_max of the image.
ErasingResult random_erasing_detailed(const ImageU8& img, RandomStream& rng,
                                      const ErasingConfig& cfg = {});

ImageU8 random_erasing(const ImageU8& img, RandomStream& rng, double min_fraction = 0.10);
ImageU8 random_erasing(const ImageU8& img, RandomStream& rng, const ErasingConfig& cfg);

// ---------------------------------------------------------------------------
// Background invariance
// ---------------------------------------------------------------------------

struct SoilBank {
  std::vector<ImageU8> images;

  bool empty() const noexcept { return images.empty(); }
  std::size_t size() const noexcept { return images.size(); }
};

/// Keeps the images whose refined vegetation mask covers less than
/// `max_fraction` of the frame.
SoilBank build_soil_bank(const std::vector<ImageU8>& images, double theta = kDefaultTheta,
                         double max_fraction = kSoilMaxFraction);

struct BackgroundConfig {
  double theta = kDefaultTheta;
  double translate = 0.25;  // fraction of W / H
};

struct BackgroundResult {
  ImageU8 image;
  VegetationMask mask;  // refined mask of the source image
  ImageU8 soil;         // chosen soil image resized to the source dimensions
  std::size_t soil_index = 0;
  int dx = 0;
  int dy = 0;
};

/// Draws, in order: soil index, dx, dy. Translations are rounded to whole
/// pixels; pasted pixels landing outside the frame are dropped.
BackgroundResult background_invariance_detailed(const ImageU8& img, const SoilBank& bank,
                                                RandomStream& rng,
                                                const BackgroundConfig& cfg = {});

ImageU8 background_invariance(const ImageU8& img, const SoilBank& bank, RandomStream& rng,
                              double theta = kDefaultTheta);

}  // namespace agrissl
