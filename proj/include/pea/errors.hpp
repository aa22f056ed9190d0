#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pea {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid static configuration (stride, widths, schedule boundaries, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation requested in the wrong lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Runtime precondition violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class VersionError : public LoadError {
 public:
  using LoadError::LoadError;
};

class ChecksumError : public LoadError {
 public:
  using LoadError::LoadError;
};

class ShapeError : public LoadError {
 public:
  using LoadError::LoadError;
};

/// A model could not be collapsed because some ensemble layers have alpha < 1.
class CollapseError : public ContractError {
 public:
  using Offender = std::pair<std::string, double>;

  explicit CollapseError(std::vector<Offender> offenders)
      : ContractError(describe(offenders)), offenders_(std::move(offenders)) {}

  const std::vector<Offender>& offenders() const noexcept { return offenders_; }

 private:
  static std::string describe(const std::vector<Offender>& offenders) {
    std::string msg = "cannot collapse to ReLU; layers with alpha < 1:";
    for (const auto& [name, alpha] : offenders) {
      msg += " " + name + " (alpha=" + std::to_string(alpha) + ")";
    }
    return msg;
  }

  std::vector<Offender> offenders_;
};

}  // namespace pea
