#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridcast {

// Base for every error raised by the library. The CLI maps UserError
// subclasses to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors caused by bad input: files, configuration, flags.
class UserError : public Error {
 public:
  using Error::Error;
};

// Errors caused by an internal contract being violated.
class InternalError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InternalError {
 public:
  using InternalError::InternalError;
};

class ContractError : public InternalError {
 public:
  using InternalError::InternalError;
};

class NumericalError : public InternalError {
 public:
  using InternalError::InternalError;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

class ParameterError : public UserError {
 public:
  using UserError::UserError;
};

class InputError : public UserError {
 public:
  using UserError::UserError;
};

class DataError : public UserError {
 public:
  using UserError::UserError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : DataError(what), row_(row), column_(column) {}
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class OrderError : public DataError {
 public:
  OrderError(const std::string& what, std::size_t row) : DataError(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class MissingDataError : public DataError {
 public:
  MissingDataError(const std::string& what, std::vector<double> fractions)
      : DataError(what), fractions_(std::move(fractions)) {}
  const std::vector<double>& fractions() const { return fractions_; }

 private:
  std::vector<double> fractions_;
};

class InsufficientDataError : public DataError {
 public:
  InsufficientDataError(const std::string& what, std::size_t required)
      : DataError(what), required_(required) {}
  std::size_t required() const { return required_; }

 private:
  std::size_t required_;
};

class UndefinedMetricError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public UserError {
 public:
  using UserError::UserError;
};

class MalformedFileError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

// Raised when a checkpoint cannot be applied to a dataset (fine-tune, evaluate).
class IncompatibleCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace gridcast
