#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace satsync {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Base for every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes or invalid values in user-provided data. `field()` names
/// the offending entry (a member name or a JSON pointer).
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A design parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a certified result.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition_estimate = 0.0)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// A controller or observer design step failed its certificate.
class DesignError : public Error {
 public:
  using Error::Error;
};

}  // namespace satsync
