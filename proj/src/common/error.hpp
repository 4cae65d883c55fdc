// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <stdexcept>
#include <string>

namespace maxmatch {

/// Failure classes; the numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kConfig = 2,
  kNumeric = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Invalid configuration, argument, or architecture/shape mismatch.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// NaN/Inf, divergence or solver non-convergence.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace maxmatch
