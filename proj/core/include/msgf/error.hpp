#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msgf {

// Root of every exception the library throws. Callers that only need to
// distinguish "our typed failure" from a genuine crash catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not agree for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyReductionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes in a binary or text input. `offset` is the byte position
// where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Structurally valid input whose content breaks a type invariant. `field` is
// a JSON-pointer-like path such as "boxes[1][2]".
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A NaN/Inf showed up where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace msgf
