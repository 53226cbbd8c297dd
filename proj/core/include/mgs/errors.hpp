#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mgs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration. `field()` names the offending setting (dotted path
// for config-file fields, parameter name otherwise).
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A pair of timesteps given in the wrong order (s >= t).
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Gaussian likelihood with sigma_y = 0 has no finite gradient.
class DegenerateLikelihoodError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Class posterior requested from a single-component prior.
class ClassificationError : public Error {
 public:
  using Error::Error;
};

// Non-finite state encountered during sampling or evaluation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Quadrature grid cannot resolve the integrand at the requested noise level.
class OraclePrecisionError : public Error {
 public:
  using Error::Error;
};

class ProjectionDegenerateError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgs
