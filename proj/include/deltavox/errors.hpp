// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by every module.

#ifndef DELTAVOX_ERRORS_HPP
#define DELTAVOX_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deltavox {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: non-finite coordinates, length mismatches, missing columns.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Incompatible configuration: grid specs that differ, wrong frame counts, bad weights.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Internal indices that no longer agree with the data they point into.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Numeric guard tripped (e.g. exp() argument past the safe range).
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Gradient-check preconditions violated (residual too close to a norm kink).
class TestSetupError : public Error {
 public:
  using Error::Error;
};

/// On-disk format violation. Carries the byte offset of the first bad byte.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        message_(what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  /// Description without the offset suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::uint64_t offset_;
};

}  // namespace deltavox

#endif  // DELTAVOX_ERRORS_HPP
