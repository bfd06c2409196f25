#pragma once

// Run configuration: one JSON document with sections spectral, chain, tebd,
// ttm, model, output, bench, spectrum, steady. Physics parameters have no
// defaults; numerical tolerances do.

#include <optional>
#include <string>
#include <vector>

#include "chaintensor/models.hpp"
#include "chaintensor/spectral.hpp"

namespace chaintensor::cli {

// Schema violation; `path` names the offending field, e.g. "tebd.chi".
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : ValidationError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SpectralSection {
  std::string kind;  // drude_lorentz | power_law_exp | tabulated
  SpectralDensity density = SpectralDensity::drude_lorentz(0.0, 1.0, 1.0);
};

struct ChainSection {
  std::size_t length = 0;     // N
  std::size_t local_dim = 0;  // d
};

struct TebdSection {
  std::size_t max_bond = 0;  // chi
  double dt = 0.0;
  double sv_floor = 1e-10;
  std::size_t steps = 0;
  double imag_time_step = 0.0;
  double preparation_tolerance = 1e-6;
  bool disentangle_ancilla = true;
};

struct TtmSection {
  std::size_t learn_steps = 0;
  double threshold = 1e-7;
  std::optional<std::size_t> cutoff_override;
  std::size_t propagate_steps = 0;
  std::string tensors_path;  // propagate: input container, default <out>/tensors.ttm
  std::string history_path;  // propagate: input trajectory, default <out>/training_trajectory.csv
  std::optional<std::size_t> history_rows;  // leading rows of the history file to use
};

enum class ModelType { monomer, dimer };

struct ModelSection {
  ModelType type = ModelType::monomer;
  SpinBosonParams monomer;
  DimerParams dimer;
  double beta = 0.0;  // inf allowed
  ThermalMethod thermal_method = ThermalMethod::purification;
  CMatrix initial_state;  // defaults: |e><e| (monomer), |g><g| (dimer)
};

struct OutputSection {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct BenchSection {
  std::vector<double> t_bath;
  std::vector<double> t_sim;
  std::size_t repetitions = 1;
  double velocity = 0.0;  // sites per unit time; N = ceil(velocity * t_bath)
};

struct SpectrumSection {
  std::size_t tau_steps = 0;
  Window window = Window::hann;
  double omega_min = 0.0;
  double omega_max = -1.0;
};

struct SteadySection {
  std::vector<double> betas;
  double tolerance = 1e-9;
  std::size_t window = 20;
  std::size_t max_steps = 1000000;
};

struct RunConfig {
  std::optional<SpectralSection> spectral;
  std::optional<ChainSection> chain;
  std::optional<TebdSection> tebd;
  std::optional<TtmSection> ttm;
  std::optional<ModelSection> model;
  OutputSection output;
  std::optional<BenchSection> bench;
  std::optional<SpectrumSection> spectrum;
  std::optional<SteadySection> steady;
  std::string source_text;  // the document as read
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Section accessors that raise ConfigError when a subcommand needs a missing section.
const SpectralSection& require_spectral(const RunConfig& cfg);
const ChainSection& require_chain(const RunConfig& cfg);
const TebdSection& require_tebd(const RunConfig& cfg);
const TtmSection& require_ttm(const RunConfig& cfg);
const ModelSection& require_model(const RunConfig& cfg);

}  // namespace chaintensor::cli
