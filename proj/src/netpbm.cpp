#include "agrissl/netpbm.hpp"

#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

namespace agrissl {

namespace {

struct Header {
  int width = 0;
  int height = 0;
  std::size_t payload_offset = 0;
};

bool is_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* field) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw DecodeError(std::string("malformed ") + field + ": too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw DecodeError(std::string("malformed ") + field);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }
  bool at_space() const { return pos_ < bytes_.size() && is_space(bytes_[pos_]); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Header parse_header(std::span<const std::uint8_t> bytes, std::string_view magic,
                    std::size_t channels) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    throw DecodeError("malformed magic: expected " + std::string(magic));
  }
  HeaderReader reader(bytes.subspan(2));
  Header h;
  const long width = reader.read_uint("width");
  const long height = reader.read_uint("height");
  const long maxval = reader.read_uint("maxval");
  if (width < 1) throw DecodeError("malformed width: must be >= 1");
  if (height < 1) throw DecodeError("malformed height: must be >= 1");
  if (maxval != 255) throw DecodeError("unsupported maxval " + std::to_string(maxval));
  if (!reader.at_space()) throw DecodeError("malformed header: missing whitespace after maxval");
  reader.advance();
  h.width = static_cast<int>(width);
  h.height = static_cast<int>(height);
  h.payload_offset = 2 + reader.pos();
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - h.payload_offset < need) {
    throw DecodeError("truncated payload: expected " + std::to_string(need) + " bytes, got " +
                      std::to_string(bytes.size() - h.payload_offset));
  }
  return h;
}

Bytes encode(std::string_view magic, int width, int height, std::span<const std::uint8_t> payload) {
  const std::string header = std::string(magic) + "\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  Bytes out;
  out.reserve(header.size() + payload.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace

ImageU8 load_ppm(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes, "P6", 3);
  const auto payload = bytes.subspan(h.payload_offset, static_cast<std::size_t>(h.width) * h.height * 3);
  return ImageU8(h.width, h.height, std::vector<std::uint8_t>(payload.begin(), payload.end()));
}

Bytes save_ppm(const ImageU8& img) { return encode("P6", img.width(), img.height(), img.data()); }

Plane<std::uint8_t> load_pgm(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes, "P5", 1);
  const auto payload = bytes.subspan(h.payload_offset, static_cast<std::size_t>(h.width) * h.height);
  return Plane<std::uint8_t>(h.width, h.height,
                             std::vector<std::uint8_t>(payload.begin(), payload.end()));
}

Bytes save_pgm(const Plane<std::uint8_t>& plane) {
  return encode("P5", plane.width(), plane.height(), plane.data());
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace agrissl
