#pragma once

#include <stdexcept>
#include <string>

namespace semap {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed a value that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Malformed configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data file (mesh, trajectory, manifest, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Text parse failure with the 1-based line it happened on.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, int line)
      : DataError(what + " (line " + std::to_string(line) + ")"), detail_(what), line_(line) {}
  int line() const { return line_; }
  /// Message without the line suffix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  int line_;
};

// A numerical routine failed or left its domain of validity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace semap
