#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eleatt {

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration or argument value is outside its valid domain.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file is structurally malformed (bad magic, bad header, wrong version).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file's checksum does not match its contents, or the file is truncated.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or gradient became NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace eleatt
