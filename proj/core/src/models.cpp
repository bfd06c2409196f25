#include "chaintensor/models.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace chaintensor {

CMatrix SpinBosonParams::hamiltonian() const {
  CMatrix h(2, 2);
  h << 0.5 * epsilon, 0.5 * delta, 0.5 * delta, -0.5 * epsilon;
  return h;
}

CMatrix SpinBosonParams::coupling() const { return excited_projector(); }

CMatrix SpinBosonParams::excited_projector() {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  return a;
}

CMatrix DimerParams::hamiltonian() const {
  CMatrix h = CMatrix::Zero(3, 3);
  h(1, 1) = epsilon1;
  h(2, 2) = epsilon2;
  h(1, 2) = h(2, 1) = exchange;
  return h;
}

CMatrix DimerParams::coupling(std::size_t site) const {
  if (site != 1 && site != 2) throw ValidationError("DimerParams::coupling: site must be 1 or 2");
  CMatrix a = CMatrix::Zero(3, 3);
  a(static_cast<Eigen::Index>(site), static_cast<Eigen::Index>(site)) = 1.0;
  return a;
}

CMatrix DimerParams::dipole() const {
  CMatrix mu = CMatrix::Zero(3, 3);
  mu(1, 0) = mu(0, 1) = mu1;
  mu(2, 0) = mu(0, 2) = mu2;
  return mu;
}

CMatrix DimerParams::ground_state() {
  CMatrix g = CMatrix::Zero(3, 3);
  g(0, 0) = 1.0;
  return g;
}

BathSetup bath_chain(const SpectralDensity& density, std::size_t length, double beta, ThermalMethod method,
                     const RecurrenceOptions& options) {
  if (!(beta >= 0.0)) throw ValidationError("bath_chain: beta must be >= 0");
  BathSetup out;
  if (method == ThermalMethod::thermofield && std::isfinite(beta)) {
    if (beta == 0.0) throw ValidationError("bath_chain: thermofield needs beta > 0");
    out.chain = map_to_thermofield_chain(density, beta, length, options);
  } else {
    out.chain = map_to_chain(density, length, options);
    out.state_beta = beta;
  }
  return out;
}

OpenSystemModel monomer_model(const SpinBosonParams& params, const ChainParameters& chain) {
  return OpenSystemModel{params.hamiltonian(), {BathChain{params.coupling(), chain}}};
}

OpenSystemModel dimer_model(const DimerParams& params, const ChainParameters& chain1, const ChainParameters& chain2) {
  return OpenSystemModel{params.hamiltonian(),
                         {BathChain{params.coupling(1), chain1}, BathChain{params.coupling(2), chain2}}};
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

PipelineResult run_pipeline(const OpenSystemModel& model, const EvolutionConfig& cfg, const CMatrix& rho0,
                            const PipelineOptions& options) {
  if (options.learn_steps < 1) throw ValidationError("run_pipeline: learn_steps must be >= 1");
  validate_density_matrix(rho0, 1e-8);
  const TebdPropagator prop(model, cfg);
  const ChainState environment = thermal_environment(model, cfg);
  const std::vector<CMatrix> preps = preparation_states(cfg.system_dim);

  PipelineResult out;
  out.runs.resize(preps.size());
  parallel_for(preps.size(), options.threads, [&](std::size_t i) {
    out.runs[i] = evolve(prop, with_system_state(environment, preps[i]), options.learn_steps);
  });
  for (const auto& run : out.runs) {
    out.basis_trajectories.push_back(run.trajectory);
    double total = 0.0;
    for (const auto& r : run.reports) total += r.total_discarded();
    out.max_discarded = std::max(out.max_discarded, total);
  }

  out.maps = maps_from_trajectories(out.basis_trajectories);
  out.tensors = tensors_from_maps(out.maps);
  apply_cutoff(out.tensors, options.cutoff_threshold);
  if (options.cutoff_override) {
    if (*options.cutoff_override < 1 || *options.cutoff_override > out.tensors.size())
      throw ValidationError("run_pipeline: cutoff override outside 1..learn_steps");
    out.tensors.cutoff = *options.cutoff_override;
  }
  out.continued = propagate(out.tensors, out.tensors.cutoff, {rho0}, options.total_steps);
  return out;
}

SteadyState steady_state(const TransferTensorSet& tensors, std::size_t cutoff, const CMatrix& rho0, double tolerance,
                         std::size_t window, std::size_t max_steps) {
  if (!(tolerance > 0.0)) throw ValidationError("steady_state: tolerance must be > 0");
  if (window < 1) throw ValidationError("steady_state: window must be >= 1");
  TensorPropagator prop(tensors, cutoff);
  prop.push(vectorize(rho0));
  CMatrix prev = rho0;
  std::size_t quiet = 0;
  SteadyState out;
  for (std::size_t n = 1; n <= max_steps; ++n) {
    CMatrix rho = unvectorize(prop.advance());
    if (!rho.allFinite()) throw NumericalError("steady_state: non-finite state at step " + std::to_string(n));
    quiet = trace_distance(rho, prev) * 2.0 < tolerance ? quiet + 1 : 0;
    prev = std::move(rho);
    if (quiet >= window) {
      out.converged = true;
      out.steps = n;
      break;
    }
  }
  if (!out.converged) {
    out.steps = max_steps;
    warn("steady_state: step budget of " + std::to_string(max_steps) + " exhausted before convergence");
  }
  out.rho = 0.5 * (prev + prev.adjoint());
  out.time = static_cast<double>(out.steps) * tensors.dt;
  return out;
}

std::vector<Complex> dipole_correlation(const CMatrix& dipole, const TransferTensorSet& tensors, std::size_t cutoff,
                                        const CMatrix& rho0, std::size_t steps, double decay_threshold) {
  if (dipole.rows() != rho0.rows() || static_cast<std::size_t>(dipole.rows()) != tensors.system_dim)
    throw ValidationError("dipole_correlation: operator dimensions do not match the tensor set");
  TensorPropagator prop(tensors, cutoff);
  const CMatrix x0 = dipole * rho0;
  prop.push(vectorize(x0));
  std::vector<Complex> c;
  c.reserve(steps + 1);
  c.push_back((dipole * x0).trace());
  for (std::size_t n = 1; n <= steps; ++n) {
    const CMatrix x = unvectorize(prop.advance());
    c.push_back((dipole * x).trace());
  }
  const double c0 = std::abs(c.front());
  if (c0 > 0.0 && std::abs(c.back()) > decay_threshold * c0) {
    std::ostringstream msg;
    msg << "dipole correlation has not decayed by the end of the window: |C(tau)|/|C(0)| = " << std::abs(c.back()) / c0;
    warn(msg.str());
  }
  return c;
}

Spectrum absorption_spectrum(const std::vector<double>& times, const std::vector<Complex>& correlation,
                             const SpectrumOptions& options) {
  const std::size_t n = times.size();
  if (n != correlation.size()) throw ValidationError("absorption_spectrum: times and correlation differ in length");
  if (n < 2) throw ValidationError("absorption_spectrum: need at least two samples");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw ValidationError("absorption_spectrum: times must increase");
  if (std::abs(times[0]) > 1e-12 * dt) throw ValidationError("absorption_spectrum: sampling must start at t = 0");
  for (std::size_t k = 1; k < n; ++k)
    if (std::abs(times[k] - times[k - 1] - dt) > 1e-9 * dt) throw ValidationError("absorption_spectrum: non-uniform sampling");

  Spectrum s;
  s.window = options.window;
  s.tau = times.back();
  const double c0 = std::abs(correlation.front());
  if (options.window == Window::rectangular && c0 > 0.0 && std::abs(correlation.back()) >= 1e-3 * c0)
    warn("absorption_spectrum: rectangular window on a correlation that has not decayed below 1e-3");

  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = std::numbers::pi * times[k] / (2.0 * s.tau);
    w[k] = options.window == Window::hann ? std::cos(x) * std::cos(x) : 1.0;
  }
  const double spacing = 2.0 * std::numbers::pi / s.tau;
  const double omega_max = options.omega_max < 0.0 ? std::numbers::pi / dt : options.omega_max;
  const auto k_min = static_cast<long>(std::ceil(options.omega_min / spacing - 1e-9));
  const auto k_max = static_cast<long>(std::floor(omega_max / spacing + 1e-9));
  for (long k = k_min; k <= k_max; ++k) {
    const double omega = spacing * static_cast<double>(k);
    Complex acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += w[j] * correlation[j] * std::exp(kI * omega * times[j]);
    s.omega.push_back(omega);
    s.absorption.push_back(acc.real() * dt);
  }
  return s;
}

std::vector<std::size_t> local_maxima(const std::vector<double>& y) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] > y[i + 1]) out.push_back(i);
  return out;
}

}  // namespace chaintensor
