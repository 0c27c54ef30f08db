#pragma once

#include <cstdint>

#include "agrissl/image.hpp"

namespace agrissl {

/// Per-pixel real field (e.g. the Excess-Green index).
using ScalarField = Plane<double>;

/// Binary mask, one byte per pixel holding 0 or 1 (1 = vegetation).
using VegetationMask = Plane<std::uint8_t>;

inline constexpr double kDefaultTheta = 0.0;
inline constexpr double kSoilMaxFraction = 0.05;

/// 2G - R - B on the normalized channels, evaluated in double precision.
ScalarField excess_green(const ImageF32& norm);

/// 1 where field > theta (strict), else 0.
VegetationMask binarize(const ScalarField& field, double theta);

/// Rectangular erosion / dilation. The window at (u, v) covers
/// du in [-a, kw-1-a] with a = floor((kw-1)/2), and likewise vertically.
/// Pixels outside the image count as background for both operators, so
/// erosion clears every pixel whose window leaves the image.
VegetationMask erode(const VegetationMask& mask, int kw, int kh);
VegetationMask dilate(const VegetationMask& mask, int kw, int kh);

/// Two erosions with a 2x2 window, then four dilations with a 6x6 window.
VegetationMask refine_mask(const VegetationMask& mask);

/// normalize -> excess green -> binarize(theta) -> refine.
VegetationMask vegetation_mask(const ImageU8& img, double theta = kDefaultTheta);

/// Share of set pixels, count(1) / (w*h).
double vegetation_fraction(const VegetationMask& mask);

/// 0/1 mask to 0/255 bytes for PGM export.
Plane<std::uint8_t> mask_to_gray(const VegetationMask& mask);

}  // namespace agrissl
