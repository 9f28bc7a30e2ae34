#ifndef RANKCF_ERRORS_HPP
#define RANKCF_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rankcf {

// Bad input, configuration, or violated precondition. The CLI maps these to
// exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t row, const std::string& what)
      : ValidationError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class AlignmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failures that only show up while computing. Exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The kernel window around a query holds no usable rows.
class CoverageError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class DegenerateInputError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class IoError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

}  // namespace rankcf

#endif  // RANKCF_ERRORS_HPP
