#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qbound {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Tolerances shared by every module. All values are absolute.
struct Numerics {
  double hermitian_tol = 1e-12;  ///< per-entry |A_ij - conj(A_ji)|
  double psd_tol = 1e-9;         ///< smallest admissible eigenvalue is -psd_tol
  double trace_tol = 1e-9;
  double prob_clip = 1e-12;      ///< Born probabilities above -prob_clip are clipped to 0
  double singular_tol = 1e-8;    ///< eigenvalue floor for "nonsingular" states

  static const Numerics& defaults();
};

// Error hierarchy. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: out-of-domain parameters, malformed matrices, bad JSON.
class InputError : public Error {
 public:
  using Error::Error;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

/// A numerical precondition failed (singular state, irregular model, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public NumericalError {
 public:
  RankDeficiencyError(const std::string& what, double eigenvalue)
      : NumericalError(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class InfeasibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IrregularModelError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, double drift)
      : NumericalError(what), drift_(drift) {}
  double drift() const { return drift_; }

 private:
  double drift_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_value)
      : Error(what), best_value_(best_value) {}
  double best_value() const { return best_value_; }

 private:
  double best_value_;
};

}  // namespace qbound
