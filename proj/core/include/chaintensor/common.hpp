#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chaintensor {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (e.g. negative frequency).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input: wrong shapes, non-monotone grids, non-physical states, bad config.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An iterative or floating-point procedure failed to reach its target.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Loss of positivity in a recurrence; carries the failing index.
class StabilityError : public NumericalError {
 public:
  StabilityError(const std::string& what, std::size_t index)
      : NumericalError(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// A computation would exceed a configured size or memory cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Warnings are physics/numerics advisories that never abort a run. The sink
// defaults to stderr and can be replaced (tests capture it).
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

// Time series of reduced system density matrices sampled every `dt`;
// states[k] is the state at t_k = k * dt.
struct Trajectory {
  double dt = 0.0;
  std::vector<CMatrix> states;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

// Column-major vectorization: vec(rho)[i + d*j] = rho(i, j).
CVector vectorize(const CMatrix& rho);
CMatrix unvectorize(const CVector& v);

// 0.5 * || a - b ||_1 for Hermitian a - b.
double trace_distance(const CMatrix& a, const CMatrix& b);

// Checks Hermiticity, unit trace and positivity within `tol`; throws ValidationError.
void validate_density_matrix(const CMatrix& rho, double tol = 1e-10);

// Matrix exponential of -i * h * t for Hermitian h via eigendecomposition.
CMatrix unitary_propagator(const CMatrix& h, double t);

}  // namespace chaintensor
