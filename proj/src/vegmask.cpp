#include "agrissl/vegmask.hpp"

#include <algorithm>

namespace agrissl {

namespace {

void check_kernel(int kw, int kh) {
  if (kw < 1 || kh < 1) throw ParameterError("morphology kernel must be at least 1x1");
}

// One separable pass of a rectangular AND (erode) or OR (dilate) along a
// single axis. Out-of-image samples are 0 for both operators.
template <bool kErode>
VegetationMask pass(const VegetationMask& in, int k, bool horizontal) {
  const int w = in.width();
  const int h = in.height();
  const int before = (k - 1) / 2;
  const int after = k - 1 - before;
  VegetationMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int centre = horizontal ? x : y;
      const int extent = horizontal ? w : h;
      const int lo = centre - before;
      const int hi = centre + after;
      std::uint8_t acc = kErode ? 1 : 0;
      if (kErode && (lo < 0 || hi >= extent)) {
        acc = 0;
      } else {
        for (int t = std::max(lo, 0); t <= std::min(hi, extent - 1); ++t) {
          const std::uint8_t v = horizontal ? in.at(t, y) : in.at(x, t);
          if (kErode && !v) {
            acc = 0;
            break;
          }
          if (!kErode && v) {
            acc = 1;
            break;
          }
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

ScalarField excess_green(const ImageF32& norm) {
  ScalarField field(norm.width(), norm.height());
  const auto src = norm.data();
  auto dst = field.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double r = src[3 * i];
    const double g = src[3 * i + 1];
    const double b = src[3 * i + 2];
    dst[i] = 2.0 * g - r - b;
  }
  return field;
}

VegetationMask binarize(const ScalarField& field, double theta) {
  VegetationMask mask(field.width(), field.height());
  std::transform(field.data().begin(), field.data().end(), mask.data().begin(),
                 [theta](double v) -> std::uint8_t { return v > theta ? 1 : 0; });
  return mask;
}

VegetationMask erode(const VegetationMask& mask, int kw, int kh) {
  check_kernel(kw, kh);
  return pass<true>(pass<true>(mask, kw, true), kh, false);
}

VegetationMask dilate(const VegetationMask& mask, int kw, int kh) {
  check_kernel(kw, kh);
  return pass<false>(pass<false>(mask, kw, true), kh, false);
}

VegetationMask refine_mask(const VegetationMask& mask) {
  VegetationMask out = mask;
  for (int i = 0; i < 2; ++i) out = erode(out, 2, 2);
  for (int i = 0; i < 4; ++i) out = dilate(out, 6, 6);
  return out;
}

VegetationMask vegetation_mask(const ImageU8& img, double theta) {
  return refine_mask(binarize(excess_green(normalize_image(img)), theta));
}

double vegetation_fraction(const VegetationMask& mask) {
  const auto count = std::count_if(mask.data().begin(), mask.data().end(),
                                   [](std::uint8_t v) { return v != 0; });
  return static_cast<double>(count) / static_cast<double>(mask.size());
}

Plane<std::uint8_t> mask_to_gray(const VegetationMask& mask) {
  Plane<std::uint8_t> out(mask.width(), mask.height());
  std::transform(mask.data().begin(), mask.data().end(), out.data().begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  return out;
}

}  // namespace agrissl
