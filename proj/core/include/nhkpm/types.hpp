#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace nhkpm {

using cplx = std::complex<double>;
using Index = Eigen::Index;

/// Dense complex vector over a (many-body or single-particle) Hilbert space.
using StateVector = Eigen::VectorXcd;

/// Bad input: violated precondition, out-of-range site, malformed parameters.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation ran but could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Restarted eigensolver exhausted its restart budget.
class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, double best_residual, int restarts)
      : NumericalError(what), best_residual_(best_residual), restarts_(restarts) {}

  double best_residual() const noexcept { return best_residual_; }
  int restarts() const noexcept { return restarts_; }

 private:
  double best_residual_;
  int restarts_;
};

/// Chebyshev recursion vectors grew: the scaled operator has spectrum outside (-1, 1).
class ScalingViolation : public NumericalError {
 public:
  ScalingViolation(const std::string& what, int step, double growth)
      : NumericalError(what), step_(step), growth_(growth) {}

  int step() const noexcept { return step_; }
  double growth() const noexcept { return growth_; }

 private:
  int step_;
  double growth_;
};

/// Left/right eigenvectors cannot be paired (defective matrix or mismatched vectors).
class PairingFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace nhkpm
