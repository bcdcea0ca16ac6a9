#pragma once

#include <stdexcept>
#include <string>

namespace vclr {

/// Base for every error raised by the library. `what()` is a single line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Operand shapes are incompatible with an operation.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& op, const std::string& detail)
      : Error("shape error in " + op + ": " + detail), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// A value outside the documented domain (non-finite, degenerate norm, bad label).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vclr
