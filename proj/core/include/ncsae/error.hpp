#pragma once

#include <stdexcept>
#include <string>

namespace ncsae {

/// Operand shapes do not chain (matmul, forward passes, parameter files).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or out-of-range input data. `kind` distinguishes failure modes
/// so callers and tests can tell a bad magic number from a truncated file.
class DataError : public std::runtime_error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kTruncated,
    kCountMismatch,
    kRagged,
    kNonNumeric,
    kOutOfRange,
    kEmpty,
    kInvalidArgument,
    kChecksum,
    kFormat,
  };

  DataError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Training produced a non-finite or exploding loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncsae
