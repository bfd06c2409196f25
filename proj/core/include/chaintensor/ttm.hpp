#pragma once

// Transfer tensor method: dynamical maps E_k from basis trajectories, the
// transfer tensors T_n = E_n - sum_{m<n} T_{n-m} E_m, and propagation of the
// reduced state with a finite memory of K tensors.
//
// Superoperators act on column-major vec(rho), so vec(A X B) = (B^T (x) A) vec X.

#include <cstddef>
#include <optional>
#include <vector>

#include "chaintensor/common.hpp"

namespace chaintensor {

class IllPosedBasisError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Physical states whose span is the full d x d matrix space: the d
// populations |i><i|, and for i < j the projectors on (|i> + |j>)/sqrt2 and
// (|i> + i|j>)/sqrt2. d^2 states in total.
std::vector<CMatrix> preparation_states(std::size_t d);

struct DynamicalMapSet {
  double dt = 0.0;
  std::size_t system_dim = 0;
  std::vector<CMatrix> maps;  // maps[k - 1] = E_k

  std::size_t size() const { return maps.size(); }
  const CMatrix& map(std::size_t k) const { return maps.at(k - 1); }
};

// E_k = R_k R_0^+ where column i of R_k is vec of trajectory i at step k.
// The initial states must span the operator space.
DynamicalMapSet maps_from_trajectories(const std::vector<Trajectory>& trajectories);

struct TransferTensorSet {
  double dt = 0.0;
  std::size_t system_dim = 0;
  std::vector<CMatrix> tensors;  // tensors[k - 1] = T_k
  std::vector<double> norms;     // Frobenius norms
  std::size_t cutoff = 0;        // K
  bool decayed = true;

  std::size_t size() const { return tensors.size(); }
  const CMatrix& tensor(std::size_t k) const { return tensors.at(k - 1); }
};

// Tensors with cutoff K = M; call select_cutoff to shorten the memory.
TransferTensorSet tensors_from_maps(const DynamicalMapSet& maps);

struct CutoffSelection {
  std::size_t cutoff = 0;
  bool decayed = true;
};

// Smallest K with ||T_k|| / ||T_1|| < threshold for every k > K. Without
// such K returns K = M and decayed = false.
CutoffSelection select_cutoff(const TransferTensorSet& tensors, double threshold = 1e-7);

// Applies select_cutoff, stores the result and warns when the norms have not decayed.
void apply_cutoff(TransferTensorSet& tensors, double threshold = 1e-7);

struct LiouvillianEstimate {
  CMatrix liouvillian;  // L_s = i (T_1 - 1) / dt, so that d vec(rho)/dt ~ -i L_s vec(rho)
  CMatrix hamiltonian;  // traceless Hermitian H minimizing || L_s - ([H, .]) ||_F
  double residual = 0.0;  // || L_s - [H, .] ||_F / || L_s ||_F
  bool flagged = false;   // residual above the tolerance
};

LiouvillianEstimate liouvillian_from_first_tensor(const CMatrix& t1, double dt, double residual_tolerance = 0.1);

// Commutator superoperator of h: vec([h, X]).
CMatrix commutator_superoperator(const CMatrix& h);

// Orthonormal traceless Hermitian basis (generalized Gell-Mann matrices),
// normalized to tr(G_a G_b) = delta_ab.
std::vector<CMatrix> gell_mann_basis(std::size_t d);

// Iterates rho_n = sum_{k=1}^{K} T_k rho_{n-k} with a ring buffer of the last
// K states. Works on arbitrary (also non-Hermitian) operators.
class TensorPropagator {
 public:
  TensorPropagator(const TransferTensorSet& tensors, std::size_t cutoff);

  void push(const CVector& state);
  // Compute, store and return the next state.
  const CVector& advance();
  const CVector& latest() const;
  std::size_t history_size() const { return filled_; }

 private:
  const TransferTensorSet* tensors_;
  std::size_t cutoff_;
  std::vector<CVector> ring_;
  std::size_t head_ = 0;  // index of the newest entry
  std::size_t filled_ = 0;
};

// Trajectory containing `history` followed by `steps` propagated states. Only
// the last min(K, history.size()) history states enter the recursion.
Trajectory propagate(const TransferTensorSet& tensors, std::size_t cutoff, const std::vector<CMatrix>& history,
                     std::size_t steps, double trace_drift_tolerance = 1e-3);

struct MemoryKernelView {
  double dt = 0.0;
  std::vector<CMatrix> samples;  // samples[j] = K_{j+2} = T_{j+2} / dt^2; K_1 is not a kernel sample
  std::vector<double> norms;

  const CMatrix& kernel(std::size_t k) const { return samples.at(k - 2); }
};

MemoryKernelView memory_kernel(const TransferTensorSet& tensors);

}  // namespace chaintensor
