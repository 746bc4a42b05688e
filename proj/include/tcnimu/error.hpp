// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <stdexcept>
#include <string>

namespace tcnimu {

enum class ErrorCategory { config, numeric, data, io, schema, state };

const char *category_name(ErrorCategory c);

// Base class of every error the library throws. The category is what the
// CLI prints before the detail and maps to an exit code.
class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string &what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string &w) : Error(ErrorCategory::config, w) {}
};

class NumericError : public Error {
public:
  explicit NumericError(const std::string &w) : Error(ErrorCategory::numeric, w) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string &w) : Error(ErrorCategory::data, w) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string &w) : Error(ErrorCategory::io, w) {}
};

class SchemaError : public Error {
public:
  explicit SchemaError(const std::string &w) : Error(ErrorCategory::schema, w) {}
};

// Misuse of stateful objects, e.g. a backward pass without a forward.
class StateError : public Error {
public:
  explicit StateError(const std::string &w) : Error(ErrorCategory::state, w) {}
};

} // namespace tcnimu
