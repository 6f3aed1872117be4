#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace qgd {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Default tolerance for symplecticity and physicality checks.
inline constexpr double kDefaultTol = 1e-9;
/// Covariance entries above this are treated as divergence.
inline constexpr double kDefaultMaxEntry = 1e12;

// Error hierarchy. Input problems derive from InputError, numerical
// failures from NumericError; the CLI maps them to exit codes 2 and 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "InputError"; }
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
  const char* kind() const noexcept override { return "DimensionError"; }
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
  const char* kind() const noexcept override { return "DomainError"; }
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
  const char* kind() const noexcept override { return "ValidationError"; }
};

class MemoryGuardError : public InputError {
 public:
  using InputError::InputError;
  const char* kind() const noexcept override { return "MemoryGuard"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "NumericError"; }
};

class OverflowError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "Overflow"; }
};

class IntegrationError : public NumericError {
 public:
  IntegrationError(const std::string& what, double time)
      : NumericError(what), time_(time) {}
  double time() const noexcept { return time_; }
  const char* kind() const noexcept override { return "IntegrationError"; }

 private:
  double time_;
};

class PhysicalityError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "PhysicalityViolation"; }
};

class PairingError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "PairingError"; }
};

class NotNormalError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "NotNormal"; }
};

class NotPassiveError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "NotPassive"; }
};

class TermCapError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "TermCap"; }
};

class LeakageExceeded : public NumericError {
 public:
  LeakageExceeded(const std::string& what, double leakage)
      : NumericError(what), leakage_(leakage) {}
  double leakage() const noexcept { return leakage_; }
  const char* kind() const noexcept override { return "LeakageExceeded"; }

 private:
  double leakage_;
};

}  // namespace qgd
