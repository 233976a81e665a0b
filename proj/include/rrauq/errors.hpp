#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rrauq {

/// Base class for every error raised by the library. The C API maps each
/// subclass onto one status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the relationship between arguments was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation that is well formed but not defined for the given inputs,
/// e.g. blurring 2-D point data.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace rrauq
