#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agrissl/augment.hpp"

namespace agrissl {

enum class Augmentation {
  kAffine,
  kColorJitter,
  kGaussianBlur,
  kMixing,
  kRandomErasing,
  kBackgroundInvariance,
};

/// The six augmentations in a fixed canonical order (used for grids).
inline constexpr std::array<Augmentation, 6> kAllAugmentations = {
    Augmentation::kAffine,        Augmentation::kColorJitter,    Augmentation::kGaussianBlur,
    Augmentation::kMixing,        Augmentation::kRandomErasing,  Augmentation::kBackgroundInvariance,
};

std::string_view augmentation_name(Augmentation a) noexcept;
std::optional<Augmentation> parse_augmentation(std::string_view name) noexcept;

/// Parameter keys an entry of the given kind accepts.
std::vector<std::string_view> allowed_params(Augmentation a);

struct PolicyEntry {
  Augmentation name = Augmentation::kAffine;
  double probability = 1.0;
  std::map<std::string, double> params;  // overrides of the augmentation defaults

  bool operator==(const PolicyEntry&) const = default;
};

struct Policy {
  std::vector<PolicyEntry> entries;
  std::uint64_t master_seed = 0;
  double theta = kDefaultTheta;
  std::string soil_bank_path;

  bool operator==(const Policy&) const = default;

  bool contains(Augmentation a) const noexcept;
  const PolicyEntry* find(Augmentation a) const noexcept;
};

/// background_invariance 0.8, affine 0.8, mixing 0.9, gaussian_blur 0.9,
/// color_jitter 1.0, random_erasing 1.0.
Policy default_policy();

/// Throws ConfigError on duplicate names, probabilities outside [0, 1] or
/// unknown parameter keys.
void validate_policy(const Policy& policy);

/// Line-oriented text: `seed=`, `theta=`, `soil_bank=` header lines and
/// `<name> <probability> [key=value ...]` entries; `#` starts a comment.
Policy load_policy(std::string_view text);

/// Canonical form: the three header lines, then entries in stored order with
/// probabilities printed to three decimals and params sorted by key.
std::string save_policy(const Policy& policy);

AffineRanges affine_ranges(const PolicyEntry& entry);
ColorJitterRanges color_jitter_ranges(const PolicyEntry& entry);
BlurRanges blur_ranges(const PolicyEntry& entry);
ErasingConfig erasing_config(const PolicyEntry& entry);
BackgroundConfig background_config(const PolicyEntry& entry, double theta);

/// Draw this entry's parameters from `stream` and apply it unconditionally.
ImageU8 apply_entry(const ImageU8& img, const PolicyEntry& entry, const Policy& policy,
                    RandomStream& stream, const SoilBank* soil);

/// Throws ConfigError when an entry that can fire needs a soil bank and none
/// (or an empty one) is supplied.
void check_policy_ready(const Policy& policy, const SoilBank* soil);

/// For every entry in order one gate draw u in [0,1); the entry fires when
/// u < probability and then draws its own parameters from the same stream.
ImageU8 apply_policy(const ImageU8& img, const Policy& policy, RandomStream& stream,
                     const SoilBank* soil = nullptr);

/// Stream seed of view k (0 or 1) of image `image_index`.
std::uint64_t view_seed(std::uint64_t master_seed, std::uint64_t image_index, int k) noexcept;

std::pair<ImageU8, ImageU8> make_views(const ImageU8& img, const Policy& policy,
                                       std::uint64_t image_index, const SoilBank* soil = nullptr);

}  // namespace agrissl
