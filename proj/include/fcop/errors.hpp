#pragma once

#include <stdexcept>
#include <string>

namespace fcop {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation. The message names
/// the violated constraint.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate, overflow, or a numerical procedure that could not
/// produce a meaningful value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NoFeasiblePointError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Truncation search hit its cap; carries the last envelope value seen.
class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& what, double last_envelope)
      : NumericalError(what), last_envelope_(last_envelope) {}
  double last_envelope() const noexcept { return last_envelope_; }

 private:
  double last_envelope_;
};

class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Quantile requested outside [u_min, 1 - u_min]; callers are expected to use
/// the analytic copula boundary values instead.
class QuantileBandError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// f_i(x_i) fell below the density floor, so the copula density quotient is
/// meaningless at this point.
class VanishingDensityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace fcop
