#pragma once

// Physical systems and the end-to-end chain-mapping -> tensor network ->
// transfer tensor pipeline, plus observables built on learned tensors.
//
// Energies are in units of the bias eps, times in 1/eps.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chaintensor/common.hpp"
#include "chaintensor/spectral.hpp"
#include "chaintensor/tns.hpp"
#include "chaintensor/ttm.hpp"

namespace chaintensor {

// Two-level system in the basis (|e>, |g>): H = eps/2 sz + delta/2 sx with
// sz = |e><e| - |g><g|, coupled through A = |e><e|.
struct SpinBosonParams {
  double epsilon = 1.0;
  double delta = 0.6;

  CMatrix hamiltonian() const;
  CMatrix coupling() const;
  static CMatrix excited_projector();
};

// Ground state plus single-excitation manifold in the basis (|g>, |e1>, |e2>).
// H = eps1 |e1><e1| + eps2 |e2><e2| + J (|e1><e2| + |e2><e1|); site i couples
// through |ei><ei| to its own chain.
struct DimerParams {
  double epsilon1 = 1.0;
  double epsilon2 = 2.0;
  double exchange = 0.6;
  double mu1 = 1.0;
  double mu2 = 1.0;

  CMatrix hamiltonian() const;
  CMatrix coupling(std::size_t site) const;  // site 1 or 2
  CMatrix dipole() const;                    // mu1 |e1><g| + mu2 |e2><g| + h.c.
  static CMatrix ground_state();
};

// Finite-temperature treatment of a bath. Purification prepares the chain
// Gibbs state by imaginary time; thermofield maps the thermal bath exactly
// onto a vacuum chain of the thermal measure (cheaper for hot, gapless chains).
enum class ThermalMethod { purification, thermofield };

struct BathSetup {
  ChainParameters chain;
  double state_beta = std::numeric_limits<double>::infinity();  // beta for EvolutionConfig
};

BathSetup bath_chain(const SpectralDensity& density, std::size_t length, double beta, ThermalMethod method,
                     const RecurrenceOptions& options = {});

OpenSystemModel monomer_model(const SpinBosonParams& params, const ChainParameters& chain);
// Chain 1 attaches to the right of the system, chain 2 to the left.
OpenSystemModel dimer_model(const DimerParams& params, const ChainParameters& chain1, const ChainParameters& chain2);

struct PipelineOptions {
  std::size_t learn_steps = 100;
  std::size_t total_steps = 1000;  // length of the continued trajectory
  double cutoff_threshold = 1e-7;
  std::optional<std::size_t> cutoff_override;
  unsigned threads = 1;
};

struct PipelineResult {
  std::vector<Trajectory> basis_trajectories;  // one per preparation state
  std::vector<EvolutionResult> runs;
  DynamicalMapSet maps;
  TransferTensorSet tensors;
  Trajectory continued;  // from rho0: learned maps up to learn_steps, TTM beyond
  double max_discarded = 0.0;  // largest cumulative discarded weight of any run
};

// Tensor-network trajectories for every preparation state over learn_steps,
// then maps, tensors and cutoff, and a TTM continuation from rho0.
PipelineResult run_pipeline(const OpenSystemModel& model, const EvolutionConfig& cfg, const CMatrix& rho0,
                            const PipelineOptions& options);

// Runs `count` independent jobs on up to `threads` workers; job i writes only its own slot.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job);

struct SteadyState {
  CMatrix rho;
  double time = 0.0;
  std::size_t steps = 0;
  bool converged = false;
};

// Iterates the transfer-tensor recursion from rho0 until the trace-norm
// change between consecutive states stays below `tolerance` for `window`
// consecutive steps, or `max_steps` is reached (converged = false, warning).
SteadyState steady_state(const TransferTensorSet& tensors, std::size_t cutoff, const CMatrix& rho0, double tolerance,
                         std::size_t window = 20, std::size_t max_steps = 1000000);

// C(t_k) = tr[mu Phi_k(mu rho0)], k = 0..steps, with Phi the learned propagation.
std::vector<Complex> dipole_correlation(const CMatrix& dipole, const TransferTensorSet& tensors, std::size_t cutoff,
                                        const CMatrix& rho0, std::size_t steps, double decay_threshold = 1e-3);

enum class Window { hann, rectangular };

struct SpectrumOptions {
  Window window = Window::hann;
  double omega_min = 0.0;
  double omega_max = -1.0;  // < 0: Nyquist frequency pi / dt
};

struct Spectrum {
  std::vector<double> omega;       // 2 pi k / tau
  std::vector<double> absorption;  // Re sum_n w_n C(t_n) exp(i omega t_n) dt
  Window window = Window::hann;
  double tau = 0.0;
};

// Half-sided transform of C sampled at uniform `times` starting at 0.
// The Hann window is the decaying half cos^2(pi t / (2 tau)).
Spectrum absorption_spectrum(const std::vector<double>& times, const std::vector<Complex>& correlation,
                             const SpectrumOptions& options = {});

// Indices of strict local maxima of y.
std::vector<std::size_t> local_maxima(const std::vector<double>& y);

}  // namespace chaintensor
