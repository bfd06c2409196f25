#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "chaintensor/cli/config.hpp"

namespace chaintensor::cli {

// One point of the wall-time scaling study. Times in seconds, t_bath and
// t_sim in 1/eps.
struct BenchRecord {
  double t_bath = 0.0;
  double t_sim = 0.0;
  double wall_time = 0.0;  // t_w: learning phase (all basis trajectories)
  std::size_t chain_length = 0;
  std::size_t learn_steps = 0;
  std::size_t propagation_steps = 0;
  double propagation_time = 0.0;
};

struct ScalingFit {
  double c = 0.0;  // t_w = c t_bath^2, least squares through the origin
  double r_squared = 0.0;
  std::vector<double> residuals;
  // Residual signs form at most two runs, i.e. a systematic lower-order term.
  bool residual_structure = false;
  double slope = 0.0;  // propagation seconds per step
  double intercept = 0.0;
  double propagation_r_squared = 0.0;
};

// Needs at least 4 records with distinct t_bath and 2 distinct step counts;
// throws ValidationError otherwise.
ScalingFit fit_scaling(const std::vector<BenchRecord>& records);

struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  unsigned threads = 1;
};

const std::vector<std::string>& subcommand_names();

// Runs one subcommand and writes its artifacts plus run_manifest.json.
// Returns 0 on success, 2 for configuration errors, 1 for runtime failures.
int run(const std::string& subcommand, const CommandOptions& options);

}  // namespace chaintensor::cli
