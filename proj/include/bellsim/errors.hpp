#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bellsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact enumeration was requested on a model whose spaces are only reachable
// through user-supplied samplers.
class NonFiniteSpace : public Error {
 public:
  using Error::Error;
};

// The conditioning event A_x B_y != 0 has probability zero.
class DegenerateConditioning : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class UnsortedStream : public Error {
 public:
  using Error::Error;
};

class SettingConflict : public Error {
 public:
  using Error::Error;
};

class NonMonotonicTimestamps : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& reason)
      : Error(source + ":" + std::to_string(line) + ": " + reason),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class InvalidRecord : public Error {
 public:
  using Error::Error;
};

class EmptyCell : public Error {
 public:
  using Error::Error;
};

class MissingPair : public Error {
 public:
  using Error::Error;
};

// A shipped scenario failed its own enumeration checks.
class ConstructionInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace bellsim
