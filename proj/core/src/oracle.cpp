#include "chaintensor/oracle.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace chaintensor::oracle {

namespace {

// Standard Kronecker product, `a` is the slow factor.
CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMatrix annihilation(std::size_t d) {
  CMatrix b = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t n = 1; n < d; ++n) b(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(static_cast<double>(n));
  return b;
}

// op acting on mode `m` out of `modes`, identity elsewhere.
CMatrix embed_mode(const CMatrix& op, std::size_t m, std::size_t modes, std::size_t d) {
  CMatrix out = CMatrix::Identity(1, 1);
  const CMatrix id = CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < modes; ++k) out = kron(out, k == m ? op : id);
  return out;
}

}  // namespace

DenseChainSystem build_dense_chain(const CMatrix& system_hamiltonian, const std::vector<DenseBath>& baths,
                                   std::size_t local_dim, std::size_t dimension_cap) {
  const auto ds = static_cast<std::size_t>(system_hamiltonian.rows());
  std::size_t modes = 0;
  for (const auto& bath : baths) {
    if (bath.coupling.rows() != system_hamiltonian.rows()) throw ValidationError("oracle: coupling operator dimension mismatch");
    if (bath.chain.hoppings.size() + 1 != bath.chain.frequencies.size() && bath.chain.length() > 0)
      throw ValidationError("oracle: chain needs length-1 hoppings");
    modes += bath.chain.length();
  }
  double env_dim = std::pow(static_cast<double>(local_dim), static_cast<double>(modes));
  if (static_cast<double>(ds) * env_dim > static_cast<double>(dimension_cap))
    throw ResourceError("oracle: dense dimension exceeds cap of " + std::to_string(dimension_cap));

  DenseChainSystem sys;
  sys.system_dim = ds;
  sys.environment_dim = static_cast<std::size_t>(std::llround(env_dim));
  const auto de = static_cast<Eigen::Index>(sys.environment_dim);
  const CMatrix b = annihilation(local_dim);
  const CMatrix n_op = b.adjoint() * b;

  CMatrix h_env = CMatrix::Zero(de, de);
  CMatrix h_int = CMatrix::Zero(static_cast<Eigen::Index>(ds) * de, static_cast<Eigen::Index>(ds) * de);
  std::size_t offset = 0;
  for (const auto& bath : baths) {
    const auto& ch = bath.chain;
    for (std::size_t n = 0; n < ch.length(); ++n)
      h_env += ch.frequencies[n] * embed_mode(n_op, offset + n, modes, local_dim);
    for (std::size_t n = 0; n + 1 < ch.length(); ++n) {
      const CMatrix bn = embed_mode(b, offset + n, modes, local_dim);
      const CMatrix bm = embed_mode(b, offset + n + 1, modes, local_dim);
      const CMatrix hop = bn.adjoint() * bm;
      h_env += ch.hoppings[n] * (hop + hop.adjoint());
    }
    if (ch.length() > 0) {
      const CMatrix b0 = embed_mode(b, offset, modes, local_dim);
      h_int += ch.system_coupling * kron(bath.coupling, b0 + b0.adjoint());
    }
    offset += ch.length();
  }
  sys.environment_hamiltonian = h_env;
  sys.hamiltonian = kron(system_hamiltonian, CMatrix::Identity(de, de)) +
                    kron(CMatrix::Identity(static_cast<Eigen::Index>(ds), static_cast<Eigen::Index>(ds)), h_env) + h_int;
  return sys;
}

CMatrix gibbs_state(const CMatrix& hamiltonian, double beta) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hamiltonian);
  const RVector& e = es.eigenvalues();
  RVector p(e.size());
  const double emin = e.minCoeff();
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (std::isinf(beta)) p(i) = std::abs(e(i) - emin) < 1e-12 ? 1.0 : 0.0;
    else p(i) = std::exp(-beta * (e(i) - emin));
  }
  p /= p.sum();
  return es.eigenvectors() * p.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix product_initial_state(const DenseChainSystem& sys, const CMatrix& rho_sys, double beta) {
  validate_density_matrix(rho_sys, 1e-10);
  return kron(rho_sys, gibbs_state(sys.environment_hamiltonian, beta));
}

CMatrix partial_trace_environment(const CMatrix& full, std::size_t system_dim) {
  const auto ds = static_cast<Eigen::Index>(system_dim);
  const Eigen::Index de = full.rows() / ds;
  if (de * ds != full.rows()) throw ValidationError("partial trace: dimension is not a multiple of the system dimension");
  CMatrix out(ds, ds);
  for (Eigen::Index s = 0; s < ds; ++s)
    for (Eigen::Index t = 0; t < ds; ++t) out(s, t) = full.block(s * de, t * de, de, de).trace();
  return out;
}

Trajectory dense_evolve(const DenseChainSystem& sys, const CMatrix& full_state, double dt, std::size_t steps,
                        Integrator integrator) {
  if (full_state.rows() != sys.hamiltonian.rows()) throw ValidationError("dense_evolve: state dimension mismatch");
  Trajectory traj;
  traj.dt = dt;
  traj.states.reserve(steps + 1);
  traj.states.push_back(partial_trace_environment(full_state, sys.system_dim));

  if (integrator == Integrator::eigendecomposition) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sys.hamiltonian);
    const CMatrix& v = es.eigenvectors();
    const RVector& e = es.eigenvalues();
    const CMatrix rho_eig = v.adjoint() * full_state * v;
    CMatrix evolved(rho_eig.rows(), rho_eig.cols());
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      for (Eigen::Index j = 0; j < rho_eig.cols(); ++j)
        for (Eigen::Index i = 0; i < rho_eig.rows(); ++i)
          evolved(i, j) = rho_eig(i, j) * std::exp(-kI * (e(i) - e(j)) * t);
      traj.states.push_back(partial_trace_environment(v * evolved * v.adjoint(), sys.system_dim));
    }
  } else {
    const CMatrix u = (CMatrix(-kI * dt * sys.hamiltonian)).exp();
    CMatrix rho = full_state;
    for (std::size_t k = 1; k <= steps; ++k) {
      rho = u * rho * u.adjoint();
      traj.states.push_back(partial_trace_environment(rho, sys.system_dim));
    }
  }
  return traj;
}

std::vector<double> mode_occupations(const DenseChainSystem& sys, const CMatrix& full_state, std::size_t local_dim) {
  std::size_t modes = 0;
  for (std::size_t e = sys.environment_dim; e > 1; e /= local_dim) ++modes;
  const CMatrix env = [&] {
    // Trace out the system factor.
    const auto de = static_cast<Eigen::Index>(sys.environment_dim);
    CMatrix r = CMatrix::Zero(de, de);
    for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(sys.system_dim); ++s) r += full_state.block(s * de, s * de, de, de);
    return r;
  }();
  const CMatrix b = annihilation(local_dim);
  const CMatrix n_op = b.adjoint() * b;
  std::vector<double> occ;
  for (std::size_t m = 0; m < modes; ++m) occ.push_back((env * embed_mode(n_op, m, modes, local_dim)).trace().real());
  return occ;
}

LindbladGenerator LindbladGenerator::build(const CMatrix& hamiltonian, const std::vector<CMatrix>& jump_operators,
                                           const std::vector<double>& rates) {
  if (jump_operators.size() != rates.size()) throw ValidationError("lindblad: one rate per jump operator required");
  const Eigen::Index d = hamiltonian.rows();
  const CMatrix id = CMatrix::Identity(d, d);
  LindbladGenerator g;
  g.dim = static_cast<std::size_t>(d);
  // vec(A X B) = (B^T (x) A) vec(X)
  g.superoperator = -kI * (kron(id, hamiltonian) - kron(hamiltonian.transpose(), id));
  for (std::size_t j = 0; j < jump_operators.size(); ++j) {
    const CMatrix& l = jump_operators[j];
    if (rates[j] < 0.0) throw ValidationError("lindblad: rates must be non-negative");
    const CMatrix ldl = l.adjoint() * l;
    g.superoperator += rates[j] * (kron(l.conjugate(), l) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id));
  }
  return g;
}

CMatrix semigroup_map(const LindbladGenerator& generator, double t) {
  return CMatrix(generator.superoperator * t).exp();
}

std::vector<Trajectory> semigroup_trajectories(const LindbladGenerator& generator, double dt, std::size_t steps,
                                               const std::vector<CMatrix>& initial_states) {
  std::vector<CMatrix> maps;
  maps.reserve(steps);
  for (std::size_t k = 1; k <= steps; ++k) maps.push_back(semigroup_map(generator, static_cast<double>(k) * dt));
  std::vector<Trajectory> out;
  for (const auto& rho0 : initial_states) {
    Trajectory traj;
    traj.dt = dt;
    traj.states.push_back(rho0);
    const CVector v0 = vectorize(rho0);
    for (const auto& m : maps) traj.states.push_back(unvectorize(m * v0));
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace chaintensor::oracle
