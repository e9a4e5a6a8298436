#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace logicloss {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: constraint sources, configs, data files.
class InputError : public Error {
 public:
  using Error::Error;
};

// Values that went non-finite or left their domain during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public InputError {
 public:
  SyntaxError(std::size_t line, std::size_t column, std::vector<std::string> expected,
              const std::string& found);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::vector<std::string> expected_;
};

class UnknownSlot : public InputError {
 public:
  using InputError::InputError;
};

class IndexOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class ArityMismatch : public InputError {
 public:
  using InputError::InputError;
};

class ShapeMismatch : public InputError {
 public:
  using InputError::InputError;
};

class BlowupError : public InputError {
 public:
  using InputError::InputError;
};

class UnsatisfiableConstant : public InputError {
 public:
  using InputError::InputError;
};

class EmptyClause : public InputError {
 public:
  using InputError::InputError;
};

class EmptyBatch : public InputError {
 public:
  using InputError::InputError;
};

class StaleTrace : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class NonFinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class NegativeCost : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonPositiveSigma : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteGradient : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteLoss : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace logicloss
