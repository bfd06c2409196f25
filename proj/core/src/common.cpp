#include "chaintensor/common.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

namespace chaintensor {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_slot() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  sink_slot() = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) sink_slot()(message);
}

CVector vectorize(const CMatrix& rho) {
  return Eigen::Map<const CVector>(rho.data(), rho.size());
}

CMatrix unvectorize(const CVector& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) throw ValidationError("unvectorize: length is not a perfect square");
  return Eigen::Map<const CMatrix>(v.data(), d, d);
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
  const CMatrix diff = a - b;
  const CMatrix herm = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

void validate_density_matrix(const CMatrix& rho, double tol) {
  if (rho.rows() != rho.cols() || rho.rows() == 0)
    throw ValidationError("density matrix must be square and non-empty");
  if ((rho - rho.adjoint()).norm() > tol) throw ValidationError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - Complex(1.0)) > tol) throw ValidationError("density matrix does not have unit trace");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol) throw ValidationError("density matrix is not positive semidefinite");
}

CMatrix unitary_propagator(const CMatrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()));
  const CVector phases = (-kI * t * es.eigenvalues().cast<Complex>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace chaintensor
