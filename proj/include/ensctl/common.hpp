#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ensctl {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using CRowMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error hierarchy. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or inconsistent shapes (exit code 2).
class ParameterError : public Error {
public:
  using Error::Error;
};

class ShapeError : public ParameterError {
public:
  using ParameterError::ParameterError;
};

// Numerical failure: non-finite values, solver breakdown (exit code 3).
class NumericalError : public Error {
public:
  using Error::Error;
};

class IntegrationError : public NumericalError {
public:
  IntegrationError(const std::string& what, double t, double s)
      : NumericalError(what), t_(t), s_(s) {}
  double time() const { return t_; }
  double parameter() const { return s_; }

private:
  double t_;
  double s_;
};

// A refinement loop hit its ceiling before meeting the tolerance (exit code 4).
class ToleranceNotMet : public Error {
public:
  using Error::Error;
};

/// Uniformly spaced nodes on [a, b], endpoints included exactly.
std::vector<double> linspace(double a, double b, std::size_t count);

/// Composite trapezoid weights for a strictly increasing node set.
std::vector<double> trapezoid_weights(std::span<const double> nodes);

/// True when every entry of the matrix is finite.
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace ensctl
