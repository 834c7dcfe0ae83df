// SPDX-License-Identifier: Apache-2.0
/**
 * @file   errors.hpp
 * @brief  Exception hierarchy shared by every synctva module.
 *
 * The CLI maps each family onto a distinct process exit code, so new error
 * kinds should derive from the closest existing family rather than from
 * std::runtime_error directly.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace synctva {

/// Base of all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or model dimensions do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value or argument.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A non-finite value was produced. `op()` names the first offending op.
class NumericError : public Error {
public:
  NumericError(std::string op, const std::string &what)
    : Error(what), op_(std::move(op)) {}
  const std::string &op() const noexcept { return op_; }

private:
  std::string op_;
};

/// Filesystem failure; the message always carries the path.
class IoError : public Error {
public:
  using Error::Error;
};

/// Dataset or checkpoint content is malformed.
class DataError : public Error {
public:
  enum class Kind { MissingBlob, DimMismatch, LabelOutOfRange, TruncatedBlob, Malformed };

  DataError(Kind kind, const std::string &what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

} // namespace synctva
