#pragma once

// Spectral densities of harmonic environments and their orthogonal-polynomial
// chain mapping. Conventions: linear dispersion g(x) = x, so the chain measure
// is h^2(x) dx = J(x) / pi dx on [0, omega_hc].

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "chaintensor/common.hpp"

namespace chaintensor {

struct DrudeLorentz {
  double lambda = 0.0;
  double gamma = 0.0;
};

// J(w) = lambda * w^exponent * exp(-w / cutoff)
struct PowerLawExp {
  double lambda = 0.0;
  double exponent = 1.0;
  double cutoff = 1.0;
};

// Piecewise-linear interpolation on a strictly increasing grid, zero outside.
struct Tabulated {
  std::vector<double> omega;
  std::vector<double> value;
};

class SpectralDensity {
 public:
  enum class Kind { drude_lorentz, power_law_exp, tabulated };

  static SpectralDensity drude_lorentz(double lambda, double gamma, double hard_cutoff);
  static SpectralDensity power_law_exp(double lambda, double exponent, double cutoff, double hard_cutoff);
  // A hard cutoff <= 0 means "last grid point".
  static SpectralDensity tabulated(std::vector<double> omega, std::vector<double> value, double hard_cutoff = 0.0);
  // Two-column CSV with header `omega,J`.
  static SpectralDensity load_csv(const std::filesystem::path& path, double hard_cutoff = 0.0);

  Kind kind() const;
  double hard_cutoff() const { return hard_cutoff_; }
  const std::variant<DrudeLorentz, PowerLawExp, Tabulated>& form() const { return form_; }

  // J(omega); zero beyond the hard cutoff. Throws DomainError for omega < 0.
  double operator()(double omega) const;

  // True when the density vanishes identically on its support.
  bool is_null() const;

 private:
  SpectralDensity(std::variant<DrudeLorentz, PowerLawExp, Tabulated> form, double hard_cutoff);

  std::variant<DrudeLorentz, PowerLawExp, Tabulated> form_;
  double hard_cutoff_;
};

double evaluate(const SpectralDensity& density, double omega);

// Integral of J over [0, omega_hc] by adaptive Gauss-Legendre panels.
// Throws NumericalError when the relative tolerance cannot be met.
double reorganization_energy(const SpectralDensity& density, double rel_tol = 1e-9);

// Recurrence coefficients of the monic orthogonal polynomials of a measure:
// p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x), beta_0 = total mass.
struct ChainCoefficients {
  std::vector<double> alpha;
  std::vector<double> beta;

  std::size_t size() const { return alpha.size(); }
};

// A measure represented by point masses.
struct DiscreteMeasure {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

// Discretization of h^2 = J / pi. Analytic kinds use the substitution
// omega = omega_hc * u^2 and `panels` Gauss-Legendre panels of `order` points
// in u; tabulated kinds use `order` points on each native grid interval
// (panels is ignored, the rule is exact once order exceeds the polynomial degree).
DiscreteMeasure discretize_measure(const SpectralDensity& density, std::size_t panels, std::size_t order);

// Discretized Stieltjes procedure on a discrete measure.
// Throws StabilityError when some beta_k is not strictly positive.
ChainCoefficients stieltjes(const DiscreteMeasure& measure, std::size_t n);

// Lanczos tridiagonalization of diag(nodes) with starting vector sqrt(weights),
// full reorthogonalization. Independent route to the same coefficients.
ChainCoefficients lanczos(const DiscreteMeasure& measure, std::size_t n);

struct RecurrenceOptions {
  double rel_tol = 1e-10;     // max relative change of any coefficient on doubling
  std::size_t order = 32;     // Gauss-Legendre points per panel
  std::size_t initial_panels = 16;
  std::size_t max_nodes = 1u << 20;
};

// Stieltjes coefficients for k = 0..n-1 with automatic doubling of the
// quadrature until the table is converged. Throws ValidationError for a null
// measure and NumericalError when the doubling budget is exhausted.
ChainCoefficients recurrence_coefficients(const SpectralDensity& density, std::size_t n,
                                          const RecurrenceOptions& options = {});

// Parameters of the nearest-neighbour chain Hamiltonian
// H = H_sys + c A (b_0 + b_0^dag) + sum_n w_n b_n^dag b_n
//     + sum_n t_n (b_n^dag b_{n+1} + h.c.)
struct ChainParameters {
  double system_coupling = 0.0;     // c = sqrt(beta_0)
  std::vector<double> frequencies;  // w_n = alpha_n, n = 0..N-1
  std::vector<double> hoppings;     // t_n = sqrt(beta_{n+1}), n = 0..N-2

  std::size_t length() const { return frequencies.size(); }
  // Chain of N sites with no coupling to the system and no internal dynamics.
  static ChainParameters decoupled(std::size_t length);
};

// beta_0 == 0 is accepted (decoupled system); any other beta_k <= 0 throws.
ChainParameters chain_hamiltonian(const ChainCoefficients& coefficients);

// Convenience: reorganization-checked chain for a density; null densities map
// to ChainParameters::decoupled.
ChainParameters map_to_chain(const SpectralDensity& density, std::size_t length,
                             const RecurrenceOptions& options = {});

// Thermofield form of a bath at inverse temperature beta: the measure
// J(|w|) (1 + coth(beta w / 2)) / (2 pi) on [-w_hc, w_hc], i.e. weight
// J (n + 1) / pi at +w and J n / pi at -w with n the Bose occupation. A vacuum
// chain built from it reproduces the thermal bath correlation function.
DiscreteMeasure discretize_thermal_measure(const SpectralDensity& density, double beta, std::size_t panels,
                                           std::size_t order);
ChainCoefficients thermal_recurrence_coefficients(const SpectralDensity& density, double beta, std::size_t n,
                                                  const RecurrenceOptions& options = {});
ChainParameters map_to_thermofield_chain(const SpectralDensity& density, double beta, std::size_t length,
                                         const RecurrenceOptions& options = {});

}  // namespace chaintensor
