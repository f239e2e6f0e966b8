#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snvt {

// Base error. exit_code() is what the CLI maps an escaped exception to:
// 1 = validation/usage problem, 2 = runtime failure (divergence, corrupt files).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual int exit_code() const { return 2; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

// Caller violated an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

// File could not be opened / written.
class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

// Training produced NaN/Inf.
class DivergedError : public Error {
 public:
  using Error::Error;
};

// A loss evaluated twice gave two different values.
class DeterminismError : public Error {
 public:
  using Error::Error;
};

// Unreadable binary payload (checkpoint, image). Carries the byte offset
// at which decoding failed.
class CorruptFileError : public Error {
 public:
  CorruptFileError(const std::string& msg, std::size_t offset)
      : Error(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

}  // namespace snvt
