#include <doctest.h>

#include <cmath>
#include <numbers>

#include "agrissl/augment.hpp"
#include "agrissl/synthetic.hpp"
#include "oracles.hpp"

using namespace agrissl;

namespace {

int max_abs_diff(const ImageU8& a, const ImageU8& b) {
  int worst = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(int(a.data()[i]) - int(b.data()[i])));
  }
  return worst;
}

ImageU8 solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  ImageU8 img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  }
  return img;
}

}  // namespace

TEST_CASE("sample_affine stays in range and spans it") {
  RandomStream rng(31);
  double smin = 10, smax = 0, rmin = 10, rmax = -10, hmin = 10, hmax = 0, tmin = 1e9, tmax = -1e9;
  for (int i = 0; i < 10000; ++i) {
    const AffineParams p = sample_affine(rng, 40, 20);
    REQUIRE(p.scale >= 0.5);
    REQUIRE(p.scale <= 2.0);
    REQUIRE(std::abs(p.rotation) <= std::numbers::pi);
    REQUIRE(p.shear_x >= 0.25);
    REQUIRE(p.shear_x <= 0.75);
    REQUIRE(p.shear_y >= 0.25);
    REQUIRE(p.shear_y <= 0.75);
    REQUIRE(std::abs(p.t_x) <= 10.0);
    REQUIRE(std::abs(p.t_y) <= 5.0);
    smin = std::min(smin, p.scale);
    smax = std::max(smax, p.scale);
    rmin = std::min(rmin, p.rotation);
    rmax = std::max(rmax, p.rotation);
    hmin = std::min(hmin, p.shear_x);
    hmax = std::max(hmax, p.shear_x);
    tmin = std::min(tmin, p.t_x);
    tmax = std::max(tmax, p.t_x);
  }
  CHECK(smin < 0.5 + 0.02 * 1.5);
  CHECK(smax > 2.0 - 0.02 * 1.5);
  CHECK(rmin < -std::numbers::pi * 0.98);
  CHECK(rmax > std::numbers::pi * 0.98);
  CHECK(hmin < 0.25 + 0.01);
  CHECK(hmax > 0.75 - 0.01);
  CHECK(tmin < -9.6);
  CHECK(tmax > 9.6);

  RandomStream a(5), b(5);
  const AffineParams pa = sample_affine(a, 8, 8);
  const AffineParams pb = sample_affine(b, 8, 8);
  CHECK(pa.scale == pb.scale);
  CHECK(pa.t_y == pb.t_y);
}

TEST_CASE("affine identity, shift and half turn") {
  RandomStream rng(32);
  const ImageU8 img = oracle::random_image(rng, 12, 9);
  CHECK(apply_affine(img, AffineParams{}) == img);

  AffineParams shift;
  shift.t_x = 1.0;
  const ImageU8 s = apply_affine(img, shift);
  const Rgb mean = channel_mean(img);
  for (int y = 0; y < 9; ++y) {
    for (int c = 0; c < 3; ++c) CHECK(s.at(0, y, c) == to_byte(mean[c]));
    for (int x = 1; x < 12; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(s.at(x, y, c) == img.at(x - 1, y, c));
    }
  }

  AffineParams half;
  half.rotation = std::numbers::pi;
  CHECK(max_abs_diff(apply_affine(img, half), flip_x(flip_y(img))) <= 1);

  const Eigen::Matrix2d a = affine_linear_part({2.0, 0.0, 0.5, 0.25, 0, 0});
  CHECK(a(0, 0) == doctest::Approx(2.0));
  CHECK(a(0, 1) == doctest::Approx(1.0));
  CHECK(a(1, 0) == doctest::Approx(0.5));
  CHECK(a(1, 1) == doctest::Approx(2.0));

  AffineParams singular;
  singular.shear_x = 1.0;
  singular.shear_y = 1.0;
  CHECK_THROWS_AS(apply_affine(img, singular), ParameterError);
}

TEST_CASE("color jitter") {
  RandomStream rng(33);
  const ImageU8 img = oracle::random_image(rng, 10, 10);
  CHECK(max_abs_diff(color_jitter(img, ColorJitterParams{}), img) <= 1);

  ColorJitterParams dark;
  dark.brightness = 0.0;
  const ImageU8 black = color_jitter(img, dark);
  for (auto v : black.data()) CHECK(v == 0);

  ColorJitterParams third;
  third.hue = 1.0 / 3.0;
  const ImageU8 green = color_jitter(solid(2, 2, 255, 0, 0), third);
  CHECK(max_abs_diff(green, solid(2, 2, 0, 255, 0)) <= 1);

  const Rgb g = rotate_hue({255, 0, 0}, 1.0 / 3.0);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(255.0));
  CHECK(g[2] == doctest::Approx(0.0).epsilon(1e-9));
  const Rgb b = rotate_hue({255, 0, 0}, 2.0 / 3.0);
  CHECK(b[2] == doctest::Approx(255.0));

  for (int i = 0; i < 200; ++i) {
    const Rgb px{rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)};
    const double t = rng.uniform();
    const Rgb r = rotate_hue(px, t);
    const double mx = std::max({px[0], px[1], px[2]});
    const double mn = std::min({px[0], px[1], px[2]});
    CHECK(std::max({r[0], r[1], r[2]}) == doctest::Approx(mx));
    CHECK(std::min({r[0], r[1], r[2]}) == doctest::Approx(mn));
    const Rgb back = rotate_hue(r, 1.0 - t);
    for (int c = 0; c < 3; ++c) CHECK(back[c] == doctest::Approx(px[c]).epsilon(1e-9));
  }

  for (int i = 0; i < 1000; ++i) {
    const ColorJitterParams p = sample_color_jitter(rng);
    REQUIRE(p.hue >= 0.0);
    REQUIRE(p.hue <= 0.125);
    REQUIRE(p.brightness >= 0.6);
    REQUIRE(p.brightness <= 1.4);
    REQUIRE(p.saturation >= 0.8);
    REQUIRE(p.saturation <= 1.2);
  }
}

TEST_CASE("gaussian blur") {
  const auto taps = gaussian_kernel(0.1);
  CHECK(taps.size() == 3);
  CHECK(taps[1] > 0.9999);
  CHECK(gaussian_kernel(2.0).size() == 13);
  double sum = 0;
  for (double t : gaussian_kernel(1.3)) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(gaussian_blur(ImageU8(3, 3), 0.0), ParameterError);
  CHECK_THROWS_AS(gaussian_blur(ImageU8(3, 3), -1.0), ParameterError);

  RandomStream rng(34);
  for (int v : {0, 1, 77, 128, 254, 255}) {
    const ImageU8 c = solid(9, 7, v, 255 - v, v / 2);
    for (double sigma : {0.1, 0.7, 2.0}) CHECK(gaussian_blur(c, sigma) == c);
  }
  const ImageU8 img = oracle::random_image(rng, 16, 16);
  CHECK(max_abs_diff(gaussian_blur(img, 0.1), img) <= 1);
  for (int i = 0; i < 1000; ++i) {
    const double s = sample_blur_sigma(rng);
    REQUIRE(s >= 0.1);
    REQUIRE(s <= 2.0);
  }
}

TEST_CASE("mixing provenance") {
  RandomStream rng(35);
  const ImageU8 img = oracle::random_image(rng, 32, 32);
  const ImageU8 ix = flip_x(img);
  const ImageU8 iy = flip_y(img);
  for (int t = 0; t < 20; ++t) {
    const ImageU8 out = mixing(img, rng);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const auto p = out.pixel(x, y);
        auto same = [&](const ImageU8& s) {
          return std::equal(p.begin(), p.end(), s.pixel(x, y).begin());
        };
        REQUIRE((same(img) || same(ix) || same(iy)));
      }
    }
  }
  const ImageU8 flat = solid(5, 5, 10, 20, 30);
  CHECK(mixing(flat, rng) == flat);
}

TEST_CASE("random erasing") {
  RandomStream rng(36);
  for (int t = 0; t < 50; ++t) {
    const int w = 8 + static_cast<int>(rng.uniform_index(57));
    const int h = 8 + static_cast<int>(rng.uniform_index(57));
    const ImageU8 img = oracle::random_image(rng, w, h);
    ErasingConfig cfg;
    cfg.min_fraction = rng.uniform(0.05, 0.4);
    const ErasingResult r = random_erasing_detailed(img, rng, cfg);
    CHECK(r.covered_fraction >= cfg.min_fraction);
    CHECK(r.covered_fraction ==
          doctest::Approx(double(oracle::count(r.coverage)) / img.pixel_count()));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (r.coverage.at(x, y)) continue;
        for (int c = 0; c < 3; ++c) REQUIRE(r.image.at(x, y, c) == img.at(x, y, c));
      }
    }
    for (const auto& rect : r.rectangles) {
      CHECK(rect.x >= 0);
      CHECK(rect.y >= 0);
      CHECK(rect.x + rect.width <= w);
      CHECK(rect.y + rect.height <= h);
      CHECK(rect.width * rect.height <= cfg.area_max * w * h + 1e-9);
    }
  }
  ErasingConfig bad;
  bad.min_fraction = 0.0;
  CHECK_THROWS_AS(random_erasing_detailed(ImageU8(4, 4), rng, bad), ParameterError);
  bad.min_fraction = 0.7;
  CHECK_THROWS_AS(random_erasing_detailed(ImageU8(4, 4), rng, bad), ParameterError);
}

TEST_CASE("soil bank admission") {
  std::vector<ImageU8> browns;
  for (int i = 0; i < 5; ++i) browns.push_back(solid(16, 16, 120 + i, 80, 50));
  CHECK(build_soil_bank(browns).size() == 5);

  ImageU8 half = solid(32, 32, 120, 80, 50);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 16; ++x) {
      half.at(x, y, 0) = 20;
      half.at(x, y, 1) = 220;
      half.at(x, y, 2) = 20;
    }
  }
  CHECK(build_soil_bank({half}).empty());

  const auto soils = synthetic_soil_images(24, 32, 32, 3);
  auto plants = synthetic_corpus(8, 32, 32, 4);
  std::vector<ImageU8> mixed = soils;
  mixed.insert(mixed.end(), plants.begin(), plants.end());
  const SoilBank bank = build_soil_bank(mixed);
  for (const auto& img : bank.images) CHECK(vegetation_fraction(vegetation_mask(img)) < 0.05);

  std::vector<ImageU8> reversed(mixed.rbegin(), mixed.rend());
  const SoilBank rb = build_soil_bank(reversed);
  CHECK(rb.size() == bank.size());
  for (const auto& img : rb.images) {
    CHECK(std::find(bank.images.begin(), bank.images.end(), img) != bank.images.end());
  }
}

TEST_CASE("background invariance") {
  RandomStream rng(37);
  SoilBank bank;
  bank.images.push_back(oracle::random_image(rng, 20, 10));
  bank.images.push_back(oracle::random_image(rng, 8, 8));

  // Uniform colour: normalized ExG is zero everywhere, so the mask is empty.
  const ImageU8 bare = solid(16, 16, 30, 200, 30);
  for (int t = 0; t < 10; ++t) {
    const BackgroundResult r = background_invariance_detailed(bare, bank, rng);
    CHECK(oracle::count(r.mask) == 0);
    CHECK(r.image == resize_bilinear(bank.images[r.soil_index], 16, 16));
  }

  const ImageU8 plant = synthetic_plant(rng, 32, 32);
  for (int t = 0; t < 10; ++t) {
    const BackgroundResult r = background_invariance_detailed(plant, bank, rng);
    CHECK(std::abs(r.dx) <= 8);
    CHECK(std::abs(r.dy) <= 8);
    for (int v = 0; v < 32; ++v) {
      for (int u = 0; u < 32; ++u) {
        const int su = u - r.dx;
        const int sv = v - r.dy;
        const bool pasted = su >= 0 && sv >= 0 && su < 32 && sv < 32 && r.mask.at(su, sv);
        for (int c = 0; c < 3; ++c) {
          REQUIRE(r.image.at(u, v, c) == (pasted ? plant.at(su, sv, c) : r.soil.at(u, v, c)));
        }
      }
    }
  }
  CHECK_THROWS_AS(background_invariance_detailed(plant, SoilBank{}, rng), ConfigError);
}

TEST_CASE("augmentations are pure in their stream") {
  RandomStream seed_rng(38);
  const ImageU8 img = oracle::random_image(seed_rng, 24, 24);
  RandomStream a(9), b(9);
  CHECK(mixing(img, a) == mixing(img, b));
  CHECK(random_erasing(img, a) == random_erasing(img, b));
  CHECK(apply_affine(img, sample_affine(a, 24, 24)) == apply_affine(img, sample_affine(b, 24, 24)));
}
