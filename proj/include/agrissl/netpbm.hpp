#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "agrissl/image.hpp"

namespace agrissl {

using Bytes = std::vector<std::uint8_t>;

/// Binary P6, maxval 255. Header tokens may be separated by any whitespace and
/// '#' comments; exactly one whitespace byte precedes the payload. Trailing
/// bytes after the payload are ignored.
ImageU8 load_ppm(std::span<const std::uint8_t> bytes);

/// Canonical "P6\n<w> <h>\n255\n" + raw payload.
Bytes save_ppm(const ImageU8& img);

/// Binary P5, maxval 255, same header rules as load_ppm.
Plane<std::uint8_t> load_pgm(std::span<const std::uint8_t> bytes);
Bytes save_pgm(const Plane<std::uint8_t>& plane);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

inline ImageU8 read_ppm(const std::filesystem::path& path) { return load_ppm(read_file(path)); }
inline void write_ppm(const std::filesystem::path& path, const ImageU8& img) {
  write_file(path, save_ppm(img));
}
inline Plane<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  return load_pgm(read_file(path));
}
inline void write_pgm(const std::filesystem::path& path, const Plane<std::uint8_t>& plane) {
  write_file(path, save_pgm(plane));
}

}  // namespace agrissl
