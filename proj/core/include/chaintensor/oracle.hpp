#pragma once

// Dense reference implementations for small instances: full Hilbert-space
// propagation of system + truncated chain(s), and exact Lindblad semigroups.

#include <cstddef>
#include <limits>
#include <vector>

#include "chaintensor/common.hpp"
#include "chaintensor/spectral.hpp"

namespace chaintensor::oracle {

// One environment attached to the system through `coupling` (a system operator).
struct DenseBath {
  CMatrix coupling;
  ChainParameters chain;
};

// Hamiltonian on system (x) bath_0 modes (x) bath_1 modes ..., system factor
// slowest; each mode truncated to `local_dim` Fock states.
struct DenseChainSystem {
  CMatrix hamiltonian;
  CMatrix environment_hamiltonian;  // bare chains only, on the environment factor
  std::size_t system_dim = 0;
  std::size_t environment_dim = 1;
};

DenseChainSystem build_dense_chain(const CMatrix& system_hamiltonian, const std::vector<DenseBath>& baths,
                                   std::size_t local_dim, std::size_t dimension_cap = 4096);

// exp(-beta H_env) / Z on the environment factor; beta = inf gives the
// ground state projector, beta = 0 the maximally mixed state.
CMatrix gibbs_state(const CMatrix& hamiltonian, double beta);

// rho_sys (x) Gibbs(H_env, beta).
CMatrix product_initial_state(const DenseChainSystem& sys, const CMatrix& rho_sys, double beta);

// Trace over every factor except the leading `system_dim` one.
CMatrix partial_trace_environment(const CMatrix& full, std::size_t system_dim);

enum class Integrator { eigendecomposition, scaling_and_squaring };

// Reduced system states at t_k = k dt, k = 0..steps, under exact unitary evolution.
Trajectory dense_evolve(const DenseChainSystem& sys, const CMatrix& full_state, double dt, std::size_t steps,
                        Integrator integrator = Integrator::eigendecomposition);

// Mean Fock occupation of each chain mode for a full state (environment modes in order).
std::vector<double> mode_occupations(const DenseChainSystem& sys, const CMatrix& full_state, std::size_t local_dim);

// Liouvillian on column-major vec space:
// L rho = -i[H, rho] + sum_j rate_j (L_j rho L_j^dag - {L_j^dag L_j, rho} / 2)
struct LindbladGenerator {
  CMatrix superoperator;
  std::size_t dim = 0;

  static LindbladGenerator build(const CMatrix& hamiltonian, const std::vector<CMatrix>& jump_operators,
                                 const std::vector<double>& rates);
};

// exp(L t) by Eigen's scaling-and-squaring Pade exponential.
CMatrix semigroup_map(const LindbladGenerator& generator, double t);

// One trajectory per initial state; state k is exp(L k dt) rho_0.
std::vector<Trajectory> semigroup_trajectories(const LindbladGenerator& generator, double dt, std::size_t steps,
                                               const std::vector<CMatrix>& initial_states);

}  // namespace chaintensor::oracle
