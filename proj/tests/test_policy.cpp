#include <doctest.h>

#include <set>

#include "agrissl/policy.hpp"
#include "agrissl/synthetic.hpp"
#include "oracles.hpp"

using namespace agrissl;

namespace {

int parse_error_line(const std::string& text) {
  try {
    load_policy(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

Policy all_on() {
  Policy p = default_policy();
  for (auto& e : p.entries) e.probability = 1.0;
  p.master_seed = 77;
  return p;
}

SoilBank small_bank() {
  SoilBank bank;
  bank.images = synthetic_soil_images(4, 32, 32, 5);
  return bank;
}

}  // namespace

TEST_CASE("default policy order and probabilities") {
  const Policy p = default_policy();
  REQUIRE(p.entries.size() == 6);
  const std::pair<Augmentation, double> expect[] = {
      {Augmentation::kBackgroundInvariance, 0.8}, {Augmentation::kAffine, 0.8},
      {Augmentation::kMixing, 0.9},               {Augmentation::kGaussianBlur, 0.9},
      {Augmentation::kColorJitter, 1.0},          {Augmentation::kRandomErasing, 1.0},
  };
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(p.entries[i].name == expect[i].first);
    CHECK(p.entries[i].probability == expect[i].second);
    CHECK(p.entries[i].params.empty());
  }
  CHECK(p.theta == 0.0);
  CHECK_NOTHROW(validate_policy(p));
}

TEST_CASE("default policy text parses to the default probabilities") {
  const Policy p = load_policy(
      "# default\n"
      "background_invariance 0.8\n"
      "affine 0.8\n"
      "mixing 0.9\n"
      "gaussian_blur 0.9\n"
      "color_jitter 1.0\n"
      "random_erasing 1.0\n");
  CHECK(p == default_policy());
}

TEST_CASE("names round trip") {
  for (auto a : kAllAugmentations) CHECK(parse_augmentation(augmentation_name(a)) == a);
  CHECK_FALSE(parse_augmentation("cutmix").has_value());
}

TEST_CASE("parse errors carry the line number") {
  CHECK(parse_error_line("affine 0.5\ncolor_jitter 1.5\n") == 2);
  CHECK(parse_error_line("\n\nsharpen 0.5\n") == 3);
  CHECK(parse_error_line("mixing 0.5\nmixing 0.2\n") == 2);
  CHECK(parse_error_line("affine -0.1") == 1);
  CHECK(parse_error_line("affine\n") == 1);
  CHECK(parse_error_line("affine 0.5 zoom=2\n") == 1);
  CHECK(parse_error_line("seed=abc\n") == 1);
  CHECK(parse_error_line("seed=1\nseed=2\n") == 2);
  CHECK(parse_error_line("gaussian_blur 0.5 sigma_max\n") == 1);
  CHECK(parse_error_line("gaussian_blur 0.5 sigma_max=2 # comment\n") == -1);
}

TEST_CASE("save then load is a fixed point") {
  Policy p = default_policy();
  p.master_seed = 0xFFFFFFFFFFFFFFFFULL;
  p.theta = -0.25;
  p.soil_bank_path = "soil/bank";
  p.entries[1].params["scale_max"] = 1.5;
  p.entries[1].params["rotation_max"] = 0.5;
  p.entries[3].probability = 0.125;
  const std::string text = save_policy(p);
  const Policy back = load_policy(text);
  CHECK(back == p);
  CHECK(save_policy(back) == text);
  CHECK(load_policy(save_policy(back)) == back);
  CHECK(text.rfind("seed=18446744073709551615\ntheta=-0.25\nsoil_bank=soil/bank\n", 0) == 0);
  CHECK(text.find("affine 0.800 rotation_max=0.5 scale_max=1.5\n") != std::string::npos);
}

TEST_CASE("validate_policy") {
  Policy p = default_policy();
  p.entries.push_back({Augmentation::kMixing, 0.5, {}});
  CHECK_THROWS_AS(validate_policy(p), ConfigError);
  p = default_policy();
  p.entries[0].probability = 1.01;
  CHECK_THROWS_AS(validate_policy(p), ConfigError);
  p = default_policy();
  p.entries[2].params["sigma_max"] = 1.0;  // mixing has no parameters
  CHECK_THROWS_AS(validate_policy(p), ConfigError);
}

TEST_CASE("parameter overrides reach the samplers") {
  PolicyEntry e{Augmentation::kColorJitter, 1.0, {{"hue_max", 0.05}}};
  CHECK(color_jitter_ranges(e).hue_max == 0.05);
  CHECK(color_jitter_ranges(e).hue_min == 0.0);
  PolicyEntry r{Augmentation::kRandomErasing, 1.0, {{"max_rectangles", 3}, {"min_fraction", 0.2}}};
  CHECK(erasing_config(r).max_rectangles == 3);
  CHECK(erasing_config(r).min_fraction == 0.2);
  PolicyEntry b{Augmentation::kBackgroundInvariance, 1.0, {{"translate", 0.1}}};
  CHECK(background_config(b, 0.4).translate == 0.1);
  CHECK(background_config(b, 0.4).theta == 0.4);
}

TEST_CASE("apply_policy with all probabilities zero is the identity") {
  Policy p = default_policy();
  for (auto& e : p.entries) e.probability = 0.0;
  RandomStream rng(41);
  const ImageU8 img = oracle::random_image(rng, 20, 20);
  for (int t = 0; t < 5; ++t) CHECK(apply_policy(img, p, rng) == img);
}

TEST_CASE("apply_policy with all probabilities one equals manual composition") {
  const Policy p = all_on();
  const SoilBank bank = small_bank();
  RandomStream rng(42);
  const ImageU8 img = synthetic_plant(rng, 32, 32);

  RandomStream a(1234);
  const ImageU8 got = apply_policy(img, p, a, &bank);

  RandomStream s(1234);
  ImageU8 x = img;
  s.uniform();
  x = background_invariance_detailed(x, bank, s, BackgroundConfig{}).image;
  s.uniform();
  x = apply_affine(x, sample_affine(s, 32, 32));
  s.uniform();
  x = mixing(x, s);
  s.uniform();
  x = gaussian_blur(x, sample_blur_sigma(s));
  s.uniform();
  x = color_jitter(x, sample_color_jitter(s));
  s.uniform();
  x = random_erasing(x, s, ErasingConfig{});
  CHECK(got == x);
  CHECK(a.next_u64() == s.next_u64());
}

TEST_CASE("gate draws happen for every entry") {
  // With probability 0 in front, the stream still advances one draw.
  Policy p;
  p.entries = {{Augmentation::kAffine, 0.0, {}}, {Augmentation::kMixing, 1.0, {}}};
  RandomStream rng(43);
  const ImageU8 img = oracle::random_image(rng, 8, 8);
  RandomStream a(5);
  const ImageU8 got = apply_policy(img, p, a);
  RandomStream s(5);
  s.uniform();
  s.uniform();
  CHECK(got == mixing(img, s));
}

TEST_CASE("missing soil bank is a configuration error") {
  const Policy p = default_policy();
  RandomStream rng(44);
  const ImageU8 img(8, 8);
  CHECK_THROWS_AS(apply_policy(img, p, rng), ConfigError);
  SoilBank empty;
  CHECK_THROWS_AS(make_views(img, p, 0, &empty), ConfigError);

  Policy off = p;
  off.entries[0].probability = 0.0;
  CHECK_NOTHROW(apply_policy(img, off, rng));
}

TEST_CASE("views") {
  const Policy p = all_on();
  const SoilBank bank = small_bank();
  const auto imgs = synthetic_corpus(4, 32, 32, 8);

  CHECK(view_seed(9, 3, 0) == derive_seed(9, 6));
  CHECK(view_seed(9, 3, 1) == derive_seed(9, 7));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 100; ++i) {
    seeds.insert(view_seed(p.master_seed, i, 0));
    seeds.insert(view_seed(p.master_seed, i, 1));
  }
  CHECK(seeds.size() == 200);

  for (std::uint64_t i = 0; i < imgs.size(); ++i) {
    const auto [v1, v2] = make_views(imgs[i], p, i, &bank);
    CHECK(v1 != v2);
    const auto again = make_views(imgs[i], p, i, &bank);
    CHECK(again.first == v1);
    CHECK(again.second == v2);
    RandomStream s(view_seed(p.master_seed, i, 1));
    CHECK(apply_policy(imgs[i], p, s, &bank) == v2);
  }
  // Processing order does not matter.
  const auto late = make_views(imgs[3], p, 3, &bank);
  const auto early = make_views(imgs[0], p, 0, &bank);
  CHECK(late == make_views(imgs[3], p, 3, &bank));
  CHECK(early == make_views(imgs[0], p, 0, &bank));
}
