#pragma once

#include <stdexcept>
#include <string>

namespace msca {

// Malformed input files or arguments that reference bad data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class CapacityError : public DataError {
 public:
  CapacityError(const std::string& what, std::size_t required_channels)
      : DataError(what), required_channels_(required_channels) {}
  std::size_t required_channels() const { return required_channels_; }

 private:
  std::size_t required_channels_;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class BoundsError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid configuration values (bad alpha, zero counts, unknown preset...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN / divergence during numeric work.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msca
