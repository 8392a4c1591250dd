#pragma once

#include <stdexcept>
#include <string>

namespace crlab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A calibration routine found an inconsistency (frame or convention bug).
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to converge or diverged.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed run configuration; `path` names the offending JSON pointer.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace crlab
