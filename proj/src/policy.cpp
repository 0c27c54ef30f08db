#include "agrissl/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace agrissl {

namespace {

constexpr std::array<std::string_view, 6> kNames = {
    "affine", "color_jitter", "gaussian_blur", "mixing", "random_erasing", "background_invariance",
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double param_or(const PolicyEntry& e, const char* key, double fallback) {
  const auto it = e.params.find(key);
  return it == e.params.end() ? fallback : it->second;
}

}  // namespace

std::string_view augmentation_name(Augmentation a) noexcept {
  return kNames[static_cast<std::size_t>(a)];
}

std::optional<Augmentation> parse_augmentation(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Augmentation>(i);
  }
  return std::nullopt;
}

std::vector<std::string_view> allowed_params(Augmentation a) {
  switch (a) {
    case Augmentation::kAffine:
      return {"rotation_max", "scale_max", "scale_min", "shear_max", "shear_min", "translate"};
    case Augmentation::kColorJitter:
      return {"brightness_max", "brightness_min", "contrast_max", "contrast_min",
              "hue_max",        "hue_min",        "saturation_max", "saturation_min"};
    case Augmentation::kGaussianBlur:
      return {"sigma_max", "sigma_min"};
    case Augmentation::kMixing:
      return {};
    case Augmentation::kRandomErasing:
      return {"area_max", "area_min", "aspect_max", "aspect_min", "max_rectangles", "min_fraction"};
    case Augmentation::kBackgroundInvariance:
      return {"translate"};
  }
  return {};
}

bool Policy::contains(Augmentation a) const noexcept { return find(a) != nullptr; }

const PolicyEntry* Policy::find(Augmentation a) const noexcept {
  for (const auto& e : entries) {
    if (e.name == a) return &e;
  }
  return nullptr;
}

Policy default_policy() {
  Policy p;
  p.entries = {
      {Augmentation::kBackgroundInvariance, 0.8, {}},
      {Augmentation::kAffine, 0.8, {}},
      {Augmentation::kMixing, 0.9, {}},
      {Augmentation::kGaussianBlur, 0.9, {}},
      {Augmentation::kColorJitter, 1.0, {}},
      {Augmentation::kRandomErasing, 1.0, {}},
  };
  return p;
}

void validate_policy(const Policy& policy) {
  std::set<Augmentation> seen;
  for (const auto& e : policy.entries) {
    const std::string name(augmentation_name(e.name));
    if (!seen.insert(e.name).second) throw ConfigError("duplicate entry " + name);
    if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
      throw ConfigError("probability of " + name + " outside [0, 1]");
    }
    const auto allowed = allowed_params(e.name);
    for (const auto& [key, value] : e.params) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError("unknown parameter " + key + " for " + name);
      }
    }
  }
  if (!std::isfinite(policy.theta)) throw ConfigError("theta must be finite");
}

Policy load_policy(std::string_view text) {
  Policy policy;
  std::set<std::string> headers;
  std::set<Augmentation> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto first_space = line.find_first_of(" \t");
    const auto eq = line.find('=');
    if (eq != std::string_view::npos && (first_space == std::string_view::npos || eq < first_space)) {
      const std::string key(trim(line.substr(0, eq)));
      const std::string_view value = trim(line.substr(eq + 1));
      if (!headers.insert(key).second) throw ParseError(line_no, "duplicate header " + key);
      if (key == "seed") {
        std::uint64_t seed = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
          throw ParseError(line_no, "seed must be an unsigned 64-bit integer");
        }
        policy.master_seed = seed;
      } else if (key == "theta") {
        const auto v = parse_real(value);
        if (!v) throw ParseError(line_no, "theta must be a finite real");
        policy.theta = *v;
      } else if (key == "soil_bank") {
        policy.soil_bank_path = std::string(value);
      } else {
        throw ParseError(line_no, "unknown header " + key);
      }
      continue;
    }

    const auto tokens = split_ws(line);
    const auto name = parse_augmentation(tokens[0]);
    if (!name) throw ParseError(line_no, "unknown augmentation " + std::string(tokens[0]));
    if (!seen.insert(*name).second) {
      throw ParseError(line_no, "duplicate entry " + std::string(tokens[0]));
    }
    if (tokens.size() < 2) throw ParseError(line_no, "missing probability");
    const auto prob = parse_real(tokens[1]);
    if (!prob) throw ParseError(line_no, "probability is not a number");
    if (*prob < 0.0 || *prob > 1.0) {
      throw ParseError(line_no, "probability " + std::string(tokens[1]) + " out of range [0, 1]");
    }
    PolicyEntry entry{*name, *prob, {}};
    const auto allowed = allowed_params(*name);
    for (std::size_t t = 2; t < tokens.size(); ++t) {
      const auto kv = tokens[t];
      const auto peq = kv.find('=');
      if (peq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
      const std::string key(kv.substr(0, peq));
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ParseError(line_no, "unknown parameter " + key + " for " + std::string(tokens[0]));
      }
      const auto v = parse_real(kv.substr(peq + 1));
      if (!v) throw ParseError(line_no, "parameter " + key + " is not a number");
      entry.params[key] = *v;
    }
    policy.entries.push_back(std::move(entry));
  }
  return policy;
}

std::string save_policy(const Policy& policy) {
  std::ostringstream out;
  out << "seed=" << policy.master_seed << "\n";
  out << "theta=" << format_real(policy.theta) << "\n";
  out << "soil_bank=" << policy.soil_bank_path << "\n";
  for (const auto& e : policy.entries) {
    char prob[32];
    std::snprintf(prob, sizeof(prob), "%.3f", e.probability);
    out << augmentation_name(e.name) << " " << prob;
    for (const auto& [key, value] : e.params) out << " " << key << "=" << format_real(value);
    out << "\n";
  }
  return out.str();
}

AffineRanges affine_ranges(const PolicyEntry& e) {
  AffineRanges r;
  r.scale_min = param_or(e, "scale_min", r.scale_min);
  r.scale_max = param_or(e, "scale_max", r.scale_max);
  r.rotation_max = param_or(e, "rotation_max", r.rotation_max);
  r.shear_min = param_or(e, "shear_min", r.shear_min);
  r.shear_max = param_or(e, "shear_max", r.shear_max);
  r.translate = param_or(e, "translate", r.translate);
  return r;
}

ColorJitterRanges color_jitter_ranges(const PolicyEntry& e) {
  ColorJitterRanges r;
  r.brightness_min = param_or(e, "brightness_min", r.brightness_min);
  r.brightness_max = param_or(e, "brightness_max", r.brightness_max);
  r.contrast_min = param_or(e, "contrast_min", r.contrast_min);
  r.contrast_max = param_or(e, "contrast_max", r.contrast_max);
  r.saturation_min = param_or(e, "saturation_min", r.saturation_min);
  r.saturation_max = param_or(e, "saturation_max", r.saturation_max);
  r.hue_min = param_or(e, "hue_min", r.hue_min);
  r.hue_max = param_or(e, "hue_max", r.hue_max);
  return r;
}

BlurRanges blur_ranges(const PolicyEntry& e) {
  BlurRanges r;
  r.sigma_min = param_or(e, "sigma_min", r.sigma_min);
  r.sigma_max = param_or(e, "sigma_max", r.sigma_max);
  return r;
}

ErasingConfig erasing_config(const PolicyEntry& e) {
  ErasingConfig c;
  c.min_fraction = param_or(e, "min_fraction", c.min_fraction);
  c.area_min = param_or(e, "area_min", c.area_min);
  c.area_max = param_or(e, "area_max", c.area_max);
  c.aspect_min = param_or(e, "aspect_min", c.aspect_min);
  c.aspect_max = param_or(e, "aspect_max", c.aspect_max);
  c.max_rectangles = static_cast<int>(param_or(e, "max_rectangles", c.max_rectangles));
  return c;
}

BackgroundConfig background_config(const PolicyEntry& e, double theta) {
  BackgroundConfig c;
  c.theta = theta;
  c.translate = param_or(e, "translate", c.translate);
  return c;
}

ImageU8 apply_entry(const ImageU8& img, const PolicyEntry& entry, const Policy& policy,
                    RandomStream& stream, const SoilBank* soil) {
  switch (entry.name) {
    case Augmentation::kAffine:
      return apply_affine(img, sample_affine(stream, img.width(), img.height(), affine_ranges(entry)));
    case Augmentation::kColorJitter:
      return color_jitter(img, sample_color_jitter(stream, color_jitter_ranges(entry)));
    case Augmentation::kGaussianBlur:
      return gaussian_blur(img, sample_blur_sigma(stream, blur_ranges(entry)));
    case Augmentation::kMixing:
      return mixing(img, stream);
    case Augmentation::kRandomErasing:
      return random_erasing(img, stream, erasing_config(entry));
    case Augmentation::kBackgroundInvariance:
      if (soil == nullptr || soil->empty()) {
        throw ConfigError("background_invariance requires a non-empty soil bank");
      }
      return background_invariance_detailed(img, *soil, stream,
                                            background_config(entry, policy.theta))
          .image;
  }
  return img;
}

void check_policy_ready(const Policy& policy, const SoilBank* soil) {
  const auto* bg = policy.find(Augmentation::kBackgroundInvariance);
  if (bg != nullptr && bg->probability > 0.0 && (soil == nullptr || soil->empty())) {
    throw ConfigError("policy uses background_invariance but no soil bank is loaded" +
                      (policy.soil_bank_path.empty() ? std::string()
                                                     : " (soil_bank=" + policy.soil_bank_path + ")"));
  }
}

ImageU8 apply_policy(const ImageU8& img, const Policy& policy, RandomStream& stream,
                     const SoilBank* soil) {
  check_policy_ready(policy, soil);
  ImageU8 out = img;
  for (const auto& entry : policy.entries) {
    const double gate = stream.uniform();
    if (gate < entry.probability) out = apply_entry(out, entry, policy, stream, soil);
  }
  return out;
}

std::uint64_t view_seed(std::uint64_t master_seed, std::uint64_t image_index, int k) noexcept {
  return derive_seed(master_seed, 2 * image_index + static_cast<std::uint64_t>(k));
}

std::pair<ImageU8, ImageU8> make_views(const ImageU8& img, const Policy& policy,
                                       std::uint64_t image_index, const SoilBank* soil) {
  check_policy_ready(policy, soil);
  RandomStream first(view_seed(policy.master_seed, image_index, 0));
  RandomStream second(view_seed(policy.master_seed, image_index, 1));
  return {apply_policy(img, policy, first, soil), apply_policy(img, policy, second, soil)};
}

}  // namespace agrissl
