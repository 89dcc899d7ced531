#pragma once

#include <stdexcept>
#include <string>

namespace codadapt {

/// Input data has the wrong shape, range or content.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument is outside its documented domain (index, count, size).
class InvalidArgument : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The experiment or model configuration is inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint could not be read or does not fit the model.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two user-supplied sets violate a protocol constraint (e.g. overlap).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace codadapt
