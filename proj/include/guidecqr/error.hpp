#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace guidecqr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (empty input, bad count...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Transport or HTTP status failure talking to a remote provider. Retryable.
class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status)
      : Error(what + " (status " + std::to_string(status) + ")"), status_(status) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return true; }

 private:
  int status_;
};

/// Remote provider answered, but the payload does not follow the protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace guidecqr
