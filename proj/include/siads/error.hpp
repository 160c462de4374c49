#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace siads {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a precondition (too few samples, bad range, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// A text record could not be parsed.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Stream or file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact is corrupt or of an unknown version.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, version, checksum, truncated, invalid };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Caller misused an API (wrong configuration, guard violated).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace siads
