#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qdf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes, invalid axes, kernels larger than inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed, zero variance without epsilon.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant (records, configs, parameters).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed textual input. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary input. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// Autodiff misuse: backward on a non-scalar, or on an already consumed graph.
class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdf
