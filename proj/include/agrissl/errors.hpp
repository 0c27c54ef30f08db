#pragma once

#include <stdexcept>
#include <string>

namespace agrissl {

// Malformed image, checkpoint, or other binary payload.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the operation's documented domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Incompatible shapes or dimensions between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad policy / training configuration, detected before any processing.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Policy text that does not parse; carries the 1-based line number.
class ParseError : public ConfigError {
 public:
  ParseError(int line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace agrissl
