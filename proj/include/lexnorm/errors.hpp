#pragma once

#include <stdexcept>
#include <string>

namespace lexnorm {

// Base of every error the library raises. Callers that only care about
// "something in lexnorm failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

class UnknownWord : public DataError {
 public:
  explicit UnknownWord(const std::string& word)
      : DataError("word not in lexicon: '" + word + "'") {}
};

class EmptyDataset : public DataError {
 public:
  EmptyDataset() : DataError("dataset is empty") {}
};

class TargetTooSmall : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DanglingContinuation : public DataError {
 public:
  using DataError::DataError;
};

class MaskOverflow : public DataError {
 public:
  using DataError::DataError;
};

class SpanOverflow : public DataError {
 public:
  using DataError::DataError;
};

class InvalidPattern : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SequenceTooLong : public DataError {
 public:
  using DataError::DataError;
};

class InvalidSoftLabel : public DataError {
 public:
  using DataError::DataError;
};

class SampleTooLarge : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};

class RowMismatch : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace lexnorm
