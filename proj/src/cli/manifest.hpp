#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace agrissl::cli {

/// Flat key=value run record. Keys keep insertion order; setting an existing
/// key overwrites it in place. Newlines in values are escaped as "\n".
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, unsigned long long value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, std::size_t value) {
    set(key, static_cast<unsigned long long>(value));
  }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  const std::string* get(const std::string& key) const;
  std::string text() const;
  void write(const std::filesystem::path& path) const;

  /// Parses text produced by text().
  static Manifest parse(const std::string& text);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace agrissl::cli
