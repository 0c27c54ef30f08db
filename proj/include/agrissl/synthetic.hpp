#pragma once

#include <cstdint>
#include <vector>

#include "agrissl/image.hpp"
#include "agrissl/random.hpp"

namespace agrissl {

/// Brown multi-octave value noise, the stand-in for bare soil.
ImageU8 synthetic_soil(RandomStream& rng, int width, int height);

/// Soil plus one to three green elliptical blobs of varying size, rotation,
/// and shade.
ImageU8 synthetic_plant(RandomStream& rng, int width, int height);

/// Image i of each corpus is drawn from its own substream derive_seed(seed, i).
std::vector<ImageU8> synthetic_corpus(std::size_t count, int width, int height, std::uint64_t seed);
std::vector<ImageU8> synthetic_soil_images(std::size_t count, int width, int height,
                                           std::uint64_t seed);

}  // namespace agrissl
