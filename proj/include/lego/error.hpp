// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lego {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed files, inconsistent shapes, invalid arguments.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value or an oracle disagreed.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ZeroRow : public DataError {
 public:
  explicit ZeroRow(std::size_t row)
      : DataError("row " + std::to_string(row) + " has zero norm"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ZeroVector : public DataError {
 public:
  ZeroVector() : DataError("cosine relationship of a zero vector") {}
  using DataError::DataError;
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class NotNormalized : public DataError {
 public:
  using DataError::DataError;
};

class IndexOutOfRange : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatch : public DataError {
 public:
  using DataError::DataError;
};

class KTooLarge : public DataError {
 public:
  KTooLarge(std::size_t k, std::size_t n)
      : DataError("top-k size " + std::to_string(k) + " exceeds node count " + std::to_string(n)) {}
};

class MissingPolarity : public DataError {
 public:
  using DataError::DataError;
};

class TooFewModalities : public DataError {
 public:
  explicit TooFewModalities(std::size_t have)
      : DataError("need at least 2 modalities, have " + std::to_string(have)) {}
};

class UnknownPreset : public DataError {
 public:
  explicit UnknownPreset(const std::string& name) : DataError("unknown preset '" + name + "'") {}
};

class DegenerateLabels : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& reason)
      : DataError(source + ":" + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class Inconsistent : public DataError {
 public:
  using DataError::DataError;
};

class NonFinite : public NumericError {
 public:
  explicit NonFinite(const std::string& op) : NumericError("non-finite value produced by " + op), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

class NonFiniteLoss : public NumericError {
 public:
  NonFiniteLoss(std::size_t step, const std::string& detail)
      : NumericError("non-finite loss at step " + std::to_string(step) + ": " + detail), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace lego
