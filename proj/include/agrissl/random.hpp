#pragma once

#include <array>
#include <cstdint>

namespace agrissl {

/// splitmix64 as a pure function: one increment by the golden gamma, then the
/// finalizer. Used for seed expansion and substream derivation.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Substream seed for `index` under `stream_seed`:
/// splitmix64(stream_seed ^ (index * 0x9E3779B97F4A7C15)).
std::uint64_t derive_seed(std::uint64_t stream_seed, std::uint64_t index) noexcept;

/// xoshiro256** generator. Identical seeds give identical sequences on every
/// platform; no std:: distributions are involved in any draw.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept;

  /// Uniform in {0, ..., n-1} via the 128-bit multiply-high reduction. n >= 1.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_;
};

}  // namespace agrissl
