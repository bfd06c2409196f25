#pragma once

// Tensor-network propagation of a system coupled to one or two oscillator
// chains. Mixed states are handled by purification: every site carries a
// physical index and an ancilla index, merged into one local index
// s = p + phys * a. The state is kept in mixed-canonical form and evolved by
// second-order Trotter splitting (even bonds half step, odd bonds full step,
// even bonds half step) with SVD truncation after every two-site update.

#include <cstddef>
#include <limits>
#include <vector>

#include "chaintensor/common.hpp"
#include "chaintensor/spectral.hpp"

namespace chaintensor {

class PreparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct EvolutionConfig {
  std::size_t chain_length = 1;  // N oscillators per chain
  std::size_t local_dim = 2;     // d Fock states per oscillator
  std::size_t system_dim = 2;    // d_sys
  std::size_t max_bond = 64;     // chi
  double time_step = 0.01;       // dt
  double sv_floor = 1e-10;       // e0, relative to the largest singular value norm
  int trotter_order = 2;         // only 2 is supported
  double beta = std::numeric_limits<double>::infinity();  // inverse temperature of the chain

  // Imaginary-time step for thermal preparation; 0 selects min(dt, 0.01).
  double imag_time_step = 0.0;
  // Cumulative discarded weight allowed during thermal preparation.
  double preparation_tolerance = 1e-6;
  // Evolve ancillas backwards under the bare chain Hamiltonian; leaves every
  // physical observable unchanged and slows entanglement growth.
  bool disentangle_ancilla = true;
  // Top Fock level population that triggers an occupancy-leakage warning.
  double leakage_threshold = 1e-6;
  // Largest two-site matrix (bytes) a single update may allocate.
  std::size_t memory_budget_bytes = std::size_t{1} << 31;

  void validate() const;
};

struct BathChain {
  CMatrix coupling;  // system operator A
  ChainParameters chain;
};

// A system with one chain (lattice: system, c_0 .. c_{N-1}) or two chains
// (lattice: c'_{N-1} .. c'_0, system, c_0 .. c_{N-1}; baths[1] is the primed one).
struct OpenSystemModel {
  CMatrix system_hamiltonian;
  std::vector<BathChain> baths;
};

// Nearest-neighbour Hamiltonian on an open lattice. bond_terms[b] acts on
// sites (b, b+1) with index p_b + dims[b] * p_{b+1}; an empty matrix means no term.
struct LatticeHamiltonian {
  std::vector<std::size_t> dims;
  std::vector<CMatrix> bond_terms;
  std::size_t system_site = 0;

  std::size_t size() const { return dims.size(); }
};

// Full lattice Hamiltonian. With `bare` the system site has dimension 1 and
// every system term (H_sys and the coupling) is dropped, leaving the chains.
LatticeHamiltonian build_lattice(const OpenSystemModel& model, std::size_t local_dim, bool bare = false);

// Per-step truncation record.
struct TruncationReport {
  std::vector<double> discarded_weight;  // per bond, summed over the step's layers
  std::size_t max_bond = 0;
  std::size_t floor_clipped = 0;  // singular values dropped by e0 while chi still had room
  double max_leakage = 0.0;       // largest top-Fock-level population seen

  double total_discarded() const;
};

class ChainState {
 public:
  struct Site {
    Eigen::Index left = 1, right = 1;
    Eigen::Index phys = 1, anc = 1;
    CMatrix data;  // (left * phys * anc) x right, row index l + left * (p + phys * a)

    Eigen::Index local() const { return phys * anc; }
  };

  ChainState() = default;
  ChainState(std::vector<Site> sites, std::size_t system_site, std::size_t center);

  std::size_t size() const { return sites_.size(); }
  std::size_t system_site() const { return system_site_; }
  std::size_t center() const { return center_; }
  const std::vector<Site>& sites() const { return sites_; }
  std::vector<std::size_t> bond_dims() const;

  // Cumulative discarded weight per completed step.
  const std::vector<double>& discarded_history() const { return discarded_history_; }
  // Sum over steps of |1 - norm| before each renormalization.
  double renormalization_drift() const { return renormalization_drift_; }

  double norm() const;

 private:
  friend class TebdPropagator;
  friend ChainState with_system_state(ChainState environment, const CMatrix& rho_sys);
  friend ChainState thermal_environment(const OpenSystemModel& model, const EvolutionConfig& cfg);

  std::vector<Site> sites_;
  std::size_t system_site_ = 0;
  std::size_t center_ = 0;
  std::vector<double> discarded_history_;
  double renormalization_drift_ = 0.0;
  bool leakage_warned_ = false;
};

// Purified chain(s) at inverse temperature cfg.beta with a one-dimensional
// placeholder on the system site. beta = inf gives the vacuum, beta = 0 the
// maximally mixed chain, finite beta imaginary-time evolution of the latter.
ChainState thermal_environment(const OpenSystemModel& model, const EvolutionConfig& cfg);

// Replace the placeholder system site by a purification of rho_sys.
ChainState with_system_state(ChainState environment, const CMatrix& rho_sys);

ChainState initial_state(const EvolutionConfig& cfg, const CMatrix& rho_sys, const OpenSystemModel& model);

class TebdPropagator {
 public:
  TebdPropagator(const OpenSystemModel& model, const EvolutionConfig& cfg);
  // Propagator for an arbitrary lattice; `ancilla` holds the bare terms used
  // for ancilla disentangling (may be empty).
  TebdPropagator(LatticeHamiltonian lattice, LatticeHamiltonian ancilla, const EvolutionConfig& cfg);

  // Advance by one time step (or one imaginary step when `imaginary`).
  TruncationReport step(ChainState& state) const;

  const EvolutionConfig& config() const { return cfg_; }
  const LatticeHamiltonian& lattice() const { return lattice_; }

 private:
  friend ChainState thermal_environment(const OpenSystemModel& model, const EvolutionConfig& cfg);
  TruncationReport step_with(ChainState& state, const std::vector<CMatrix>& half, const std::vector<CMatrix>& full,
                             const std::vector<CMatrix>& anc_half, const std::vector<CMatrix>& anc_full) const;

  EvolutionConfig cfg_;
  LatticeHamiltonian lattice_;
  LatticeHamiltonian ancilla_;
  std::vector<CMatrix> half_gates_, full_gates_;
  std::vector<CMatrix> anc_half_gates_, anc_full_gates_;
};

TruncationReport trotter_step(ChainState& state, const TebdPropagator& propagator);

struct SystemReduction {
  CMatrix rho;
  double hermiticity_defect = 0.0;  // ||rho - rho^dag||_F before Hermitization
};

// Reduced density matrix of the system site, Hermitized.
SystemReduction reduced_system(const ChainState& state);

// Reduced density matrix of any site (physical index only).
CMatrix reduced_site(const ChainState& state, std::size_t site);

// Mean Fock occupation of every site (site dimension used as Fock cutoff).
std::vector<double> site_occupations(const ChainState& state);

// Full run: reduced system states every step plus one report per step.
struct EvolutionResult {
  Trajectory trajectory;
  std::vector<TruncationReport> reports;
  double max_hermiticity_defect = 0.0;
};

EvolutionResult evolve(const TebdPropagator& propagator, ChainState state, std::size_t steps);

struct RecurrenceEstimate {
  double time = 0.0;
  bool found = false;  // false: no rebound before the horizon, time == horizon
  std::vector<double> occupation;  // first-site occupation at every step
};

// Launch |1 0 ... 0> on a bare chain and return the time of the first local
// maximum of the first-site occupation that exceeds `threshold` after the
// occupation has dropped below it.
RecurrenceEstimate recurrence_probe(const ChainParameters& chain, const EvolutionConfig& cfg, double horizon,
                                    double threshold = 0.05);

}  // namespace chaintensor
