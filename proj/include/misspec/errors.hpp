#pragma once

#include <stdexcept>
#include <string>

namespace misspec {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the support or dimension mismatch.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Unusable data set (empty, non-finite).
class DataError : public Error {
public:
  using Error::Error;
};

/// Quadrature or arithmetic produced a non-finite or unstable value.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Normalization integral of a tilt does not exist (or is unstable under refinement).
class DivergenceError : public NumericError {
public:
  using NumericError::NumericError;
};

/// Sampling grid does not cover the effective support of the tilted law.
class CoverageError : public NumericError {
public:
  using NumericError::NumericError;
};

class DirectionError : public Error {
public:
  using Error::Error;
};

class SolverError : public Error {
public:
  using Error::Error;
};

/// A regularity condition (rank, invertibility) required by the asymptotic theory fails.
class AssumptionError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace misspec
