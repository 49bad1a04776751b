// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace segan {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument, malformed configuration or broken precondition.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Unreadable/corrupt files, I/O failures, inconsistent data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss observed during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace segan
