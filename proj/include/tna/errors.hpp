#pragma once

#include <stdexcept>
#include <string>

namespace tna {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that does not allow the call.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Model or experiment configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot support the requested computation.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A row of an input file could not be parsed.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tna
