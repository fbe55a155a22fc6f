// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace banet {

using Shape = std::vector<std::int64_t>;

std::string to_string(const Shape& shape);
std::int64_t numel(const Shape& shape);

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not satisfy an operation's shape contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Batch statistics requested from a batch that is too small.
class BatchSizeError : public Error {
 public:
  using Error::Error;
};

/// backward() called on a non-scalar.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Invalid module, block or architecture configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Parameter / gradient / velocity registries disagree.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples for a statistical fit.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value appeared where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class Mode { train, eval };

}  // namespace banet
