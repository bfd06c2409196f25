#include "chaintensor/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>

#include "chaintensor/io.hpp"
#include "json.hpp"

#ifndef CHAINTENSOR_VERSION
#define CHAINTENSOR_VERSION "unknown"
#endif

namespace chaintensor::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Shared state of one invocation: output paths, timings, captured warnings.
struct Run {
  RunConfig cfg;
  fs::path out;
  unsigned threads = 1;
  std::map<std::string, double> wall_times;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  std::mutex warn_mutex;

  bool csv() const { return has_format("csv"); }
  bool json_out() const { return has_format("json"); }
  bool has_format(const std::string& f) const {
    return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), f) != cfg.output.formats.end();
  }
  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (out / name).string();
  }
  template <class F>
  auto timed(const std::string& label, F&& f) {
    const auto start = Clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      wall_times[label] += seconds_since(start);
    } else {
      auto r = f();
      wall_times[label] += seconds_since(start);
      return r;
    }
  }
};

std::ofstream open_csv(const std::string& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# units: " << io::kUnitsNote << '\n' << header << '\n';
  return out;
}

std::size_t system_dim(const ModelSection& m) { return m.type == ModelType::monomer ? 2 : 3; }

std::size_t steps_for(double time, double dt, const std::string& path) {
  const double n = time / dt;
  if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
    throw ConfigError(path, "must be an integer multiple of tebd.dt");
  return static_cast<std::size_t>(std::llround(n));
}

struct Setup {
  OpenSystemModel model;
  EvolutionConfig evolution;
};

Setup make_setup(const RunConfig& cfg, double beta, std::size_t chain_length) {
  const auto& spectral = require_spectral(cfg);
  const auto& chain = require_chain(cfg);
  const auto& tebd = require_tebd(cfg);
  const auto& m = require_model(cfg);
  const BathSetup bath = bath_chain(spectral.density, chain_length, beta, m.thermal_method);
  Setup s;
  s.model = m.type == ModelType::monomer ? monomer_model(m.monomer, bath.chain)
                                         : dimer_model(m.dimer, bath.chain, bath.chain);
  auto& e = s.evolution;
  e.chain_length = chain_length;
  e.local_dim = chain.local_dim;
  e.system_dim = system_dim(m);
  e.max_bond = tebd.max_bond;
  e.time_step = tebd.dt;
  e.sv_floor = tebd.sv_floor;
  e.beta = bath.state_beta;
  e.imag_time_step = tebd.imag_time_step;
  e.preparation_tolerance = tebd.preparation_tolerance;
  e.disentangle_ancilla = tebd.disentangle_ancilla;
  e.validate();
  return s;
}

Setup make_setup(const RunConfig& cfg) {
  return make_setup(cfg, require_model(cfg).beta, require_chain(cfg).length);
}

PipelineOptions pipeline_options(const TtmSection& ttm, unsigned threads, std::size_t total_steps) {
  PipelineOptions p;
  p.learn_steps = ttm.learn_steps;
  p.total_steps = total_steps;
  p.cutoff_threshold = ttm.threshold;
  p.cutoff_override = ttm.cutoff_override;
  p.threads = threads;
  return p;
}

// States E_k rho0 for k = 0..M.
Trajectory training_trajectory(const DynamicalMapSet& maps, const CMatrix& rho0) {
  Trajectory t;
  t.dt = maps.dt;
  t.states.push_back(rho0);
  const CVector v = vectorize(rho0);
  for (const auto& e : maps.maps) t.states.push_back(unvectorize(e * v));
  return t;
}

void cmd_chain_map(Run& run) {
  const auto& spectral = require_spectral(run.cfg);
  const auto& chain = require_chain(run.cfg);
  run.timed("chain_map", [&] {
    const ChainCoefficients coeffs = recurrence_coefficients(spectral.density, chain.length);
    io::write_coefficients_csv(run.path("coefficients.csv"), coeffs, chain_hamiltonian(coeffs));
    if (run.cfg.model && run.cfg.model->thermal_method == ThermalMethod::thermofield &&
        std::isfinite(run.cfg.model->beta)) {
      const ChainCoefficients th = thermal_recurrence_coefficients(spectral.density, run.cfg.model->beta, chain.length);
      io::write_coefficients_csv(run.path("thermofield_coefficients.csv"), th, chain_hamiltonian(th));
    }
  });
}

void cmd_evolve(Run& run) {
  const auto& tebd = require_tebd(run.cfg);
  const auto& m = require_model(run.cfg);
  if (tebd.steps == 0) throw ConfigError("tebd.steps", "evolve needs steps >= 1");
  const Setup s = run.timed("setup", [&] { return make_setup(run.cfg); });
  const TebdPropagator prop(s.model, s.evolution);
  const ChainState start = run.timed("preparation", [&] { return initial_state(s.evolution, m.initial_state, s.model); });
  const EvolutionResult result = run.timed("evolution", [&] { return evolve(prop, start, tebd.steps); });
  if (run.csv()) io::write_trajectory_csv(run.path("trajectory.csv"), result.trajectory);
  if (run.json_out()) io::write_truncation_json(run.path("truncation.json"), result);
}

void cmd_learn(Run& run) {
  const auto& ttm = require_ttm(run.cfg);
  const auto& m = require_model(run.cfg);
  const Setup s = run.timed("setup", [&] { return make_setup(run.cfg); });
  const std::size_t total = std::max(ttm.propagate_steps, ttm.learn_steps);
  const PipelineResult r = run.timed("learning", [&] {
    return run_pipeline(s.model, s.evolution, m.initial_state, pipeline_options(ttm, run.threads, total));
  });
  io::write_tensor_container(run.path("tensors.ttm"), r.tensors);
  if (run.csv()) {
    io::write_norms_csv(run.path("norms.csv"), r.tensors);
    io::write_trajectory_csv(run.path("training_trajectory.csv"), training_trajectory(r.maps, m.initial_state));
    io::write_trajectory_csv(run.path("ttm_trajectory.csv"), r.continued);
  }
}

void cmd_propagate(Run& run) {
  const auto& ttm = require_ttm(run.cfg);
  if (ttm.propagate_steps == 0) throw ConfigError("ttm.propagate_steps", "propagate needs propagate_steps >= 1");
  const std::string tensors_path = ttm.tensors_path.empty() ? (run.out / "tensors.ttm").string() : ttm.tensors_path;
  const std::string history_path =
      ttm.history_path.empty() ? (run.out / "training_trajectory.csv").string() : ttm.history_path;
  const TransferTensorSet tensors = io::read_tensor_container(tensors_path);
  Trajectory history = io::read_trajectory_csv(history_path);
  if (ttm.history_rows) {
    if (*ttm.history_rows > history.states.size())
      throw ConfigError("ttm.history_rows", "exceeds the rows available in " + history_path);
    history.states.resize(*ttm.history_rows);
  }
  if (history.states.size() > 1 && std::abs(history.dt - tensors.dt) > 1e-12 * tensors.dt)
    throw ValidationError("history time step does not match the tensor time step");
  std::size_t k = tensors.cutoff;
  if (ttm.cutoff_override) {
    if (*ttm.cutoff_override > tensors.size()) throw ConfigError("ttm.K_override", "exceeds the stored tensor count");
    k = *ttm.cutoff_override;
  }
  const Trajectory out =
      run.timed("propagation", [&] { return propagate(tensors, k, history.states, ttm.propagate_steps); });
  io::write_trajectory_csv(run.path("propagated_trajectory.csv"), out);
}

void cmd_spectrum(Run& run) {
  const auto& ttm = require_ttm(run.cfg);
  const auto& m = require_model(run.cfg);
  if (m.type != ModelType::dimer) throw ConfigError("model.type", "spectrum needs the dimer model");
  if (!run.cfg.spectrum) throw ConfigError("spectrum", "section is required for this subcommand");
  const auto& sp = *run.cfg.spectrum;
  const Setup s = run.timed("setup", [&] { return make_setup(run.cfg); });
  const PipelineResult r = run.timed("learning", [&] {
    return run_pipeline(s.model, s.evolution, m.initial_state, pipeline_options(ttm, run.threads, 0));
  });
  const std::vector<Complex> c = run.timed("correlation", [&] {
    return dipole_correlation(m.dimer.dipole(), r.tensors, r.tensors.cutoff, m.initial_state, sp.tau_steps);
  });
  std::vector<double> times(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) times[k] = static_cast<double>(k) * r.tensors.dt;
  const Spectrum spec = absorption_spectrum(times, c, {sp.window, sp.omega_min, sp.omega_max});
  io::write_tensor_container(run.path("tensors.ttm"), r.tensors);
  if (run.csv()) {
    auto out = open_csv(run.path("correlation.csv"), "t,re_C,im_C");
    for (std::size_t k = 0; k < c.size(); ++k) out << fmt(times[k]) << ',' << fmt(c[k].real()) << ',' << fmt(c[k].imag()) << '\n';
    io::write_spectrum_csv(run.path("spectrum.csv"), spec);
  }
}

void cmd_steady_state(Run& run) {
  const auto& ttm = require_ttm(run.cfg);
  const auto& m = require_model(run.cfg);
  if (!run.cfg.steady) throw ConfigError("steady", "section is required for this subcommand");
  const auto& st = *run.cfg.steady;
  std::vector<double> populations;
  for (double beta : st.betas) {
    const Setup s = make_setup(run.cfg, beta, require_chain(run.cfg).length);
    const PipelineResult r = run.timed("learning", [&] {
      return run_pipeline(s.model, s.evolution, m.initial_state, pipeline_options(ttm, run.threads, 0));
    });
    const SteadyState ss = run.timed("steady_state", [&] {
      return steady_state(r.tensors, r.tensors.cutoff, m.initial_state, st.tolerance, st.window, st.max_steps);
    });
    // Excited weight: |e><e| for the monomer, the single-excitation manifold for the dimer.
    populations.push_back(m.type == ModelType::monomer ? ss.rho(0, 0).real() : 1.0 - ss.rho(0, 0).real());
  }
  if (run.csv()) io::write_steady_csv(run.path("steady.csv"), st.betas, populations);
}

void cmd_bench(Run& run) {
  const auto& ttm = require_ttm(run.cfg);
  const auto& tebd = require_tebd(run.cfg);
  const auto& m = require_model(run.cfg);
  if (!run.cfg.bench) throw ConfigError("bench", "section is required for this subcommand");
  const auto& b = *run.cfg.bench;

  std::vector<BenchRecord> records;
  TransferTensorSet largest;
  for (std::size_t i = 0; i < b.t_bath.size(); ++i) {
    BenchRecord rec;
    rec.t_bath = b.t_bath[i];
    rec.t_sim = b.t_sim[i];
    rec.chain_length = static_cast<std::size_t>(std::ceil(b.velocity * rec.t_bath - 1e-9));
    rec.learn_steps = steps_for(rec.t_bath, tebd.dt, "bench.t_bath");
    rec.propagation_steps = steps_for(rec.t_sim, tebd.dt, "bench.t_sim");
    const Setup s = make_setup(run.cfg, m.beta, rec.chain_length);
    TtmSection learn = ttm;
    learn.learn_steps = rec.learn_steps;
    learn.cutoff_override.reset();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < b.repetitions; ++r) {
      const auto start = Clock::now();
      PipelineResult res = run_pipeline(s.model, s.evolution, m.initial_state, pipeline_options(learn, run.threads, 0));
      best = std::min(best, seconds_since(start));
      if (i + 1 == b.t_bath.size()) largest = std::move(res.tensors);
    }
    rec.wall_time = best;
    run.wall_times["learning"] += best;
    records.push_back(rec);
  }

  // Propagation timing uses one tensor set so that only the step count varies.
  // It is cheap and noisy, so it always takes the best of at least 3 runs.
  const std::size_t prop_reps = std::max<std::size_t>(b.repetitions, 3);
  for (auto& rec : records) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < prop_reps; ++r) {
      const auto start = Clock::now();
      propagate(largest, largest.cutoff, {m.initial_state}, rec.propagation_steps);
      best = std::min(best, seconds_since(start));
    }
    rec.propagation_time = best;
    run.wall_times["propagation"] += best;
  }

  const ScalingFit fit = fit_scaling(records);
  if (run.csv()) {
    auto out = open_csv(run.path("bench.csv"),
                        "t_bath,t_sim,N,learn_steps,wall_time_s,propagation_steps,propagation_time_s,residual_s");
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      out << fmt(r.t_bath) << ',' << fmt(r.t_sim) << ',' << r.chain_length << ',' << r.learn_steps << ','
          << fmt(r.wall_time) << ',' << r.propagation_steps << ',' << fmt(r.propagation_time) << ','
          << fmt(fit.residuals[i]) << '\n';
    }
  }
  if (run.json_out()) {
    const double t_max = records.back().t_bath;
    json j{{"units", "seconds; t_bath in 1/eps"},
           {"c", fit.c},
           {"r_squared", fit.r_squared},
           {"residuals", fit.residuals},
           {"residual_structure", fit.residual_structure},
           {"propagation_slope", fit.slope},
           {"propagation_intercept", fit.intercept},
           {"propagation_r_squared", fit.propagation_r_squared},
           {"propagation_cutoff", largest.cutoff},
           {"marginal_learning_cost_per_step", 2.0 * fit.c * t_max * tebd.dt}};
    std::ofstream(run.path("bench_fit.json")) << j.dump(2) << '\n';
  }
}

using Command = std::function<void(Run&)>;

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"chain-map", cmd_chain_map}, {"evolve", cmd_evolve},         {"learn", cmd_learn},
      {"propagate", cmd_propagate}, {"spectrum", cmd_spectrum},     {"steady-state", cmd_steady_state},
      {"bench", cmd_bench}};
  return table;
}

void write_manifest(Run& run, const std::string& subcommand, const std::string& config_path, int status,
                    const std::string& error) {
  json config;
  try {
    config = json::parse(run.cfg.source_text);
  } catch (const json::exception&) {
    config = run.cfg.source_text;
  }
  json j{{"tool", "chaintensor"},
         {"version", CHAINTENSOR_VERSION},
         {"subcommand", subcommand},
         {"config_path", config_path},
         {"config", config},
         {"threads", run.threads},
         {"units", io::kUnitsNote},
         {"wall_times_s", run.wall_times},
         {"warnings", run.warnings},
         {"outputs", run.outputs},
         {"exit_status", status}};
  if (!error.empty()) j["error"] = error;
  std::ofstream((run.out / "run_manifest.json").string()) << j.dump(2) << '\n';
}

}  // namespace

ScalingFit fit_scaling(const std::vector<BenchRecord>& records) {
  if (records.size() < 4) throw ValidationError("fit_scaling: need at least 4 records");
  std::vector<double> tb;
  for (const auto& r : records) {
    if (!(r.t_bath > 0.0)) throw ValidationError("fit_scaling: t_bath must be > 0");
    if (!(r.wall_time > 0.0)) throw ValidationError("fit_scaling: wall times must be > 0");
    tb.push_back(r.t_bath);
  }
  std::sort(tb.begin(), tb.end());
  if (std::unique(tb.begin(), tb.end()) - tb.begin() < 4)
    throw ValidationError("fit_scaling: degenerate grid, need 4 distinct t_bath values");

  ScalingFit fit;
  double num = 0.0, den = 0.0, mean = 0.0;
  for (const auto& r : records) {
    const double x = r.t_bath * r.t_bath;
    num += x * r.wall_time;
    den += x * x;
    mean += r.wall_time;
  }
  fit.c = num / den;
  mean /= static_cast<double>(records.size());
  double ss_res = 0.0, ss_tot = 0.0, scale = 0.0;
  for (const auto& r : records) {
    const double res = r.wall_time - fit.c * r.t_bath * r.t_bath;
    fit.residuals.push_back(res);
    ss_res += res * res;
    ss_tot += (r.wall_time - mean) * (r.wall_time - mean);
    scale = std::max(scale, std::abs(r.wall_time));
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);

  // Sign runs of the residuals ordered by t_bath.
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return records[a].t_bath < records[b].t_bath; });
  const double noise = 1e-9 * scale;
  std::size_t runs = 0;
  int prev = 0;
  for (auto i : order) {
    const double r = fit.residuals[i];
    const int sign = r > noise ? 1 : (r < -noise ? -1 : 0);
    if (sign != 0 && sign != prev) {
      ++runs;
      prev = sign;
    }
  }
  fit.residual_structure = runs > 0 && runs <= 2;

  std::vector<double> steps;
  double sx = 0.0, sy = 0.0;
  for (const auto& r : records) {
    steps.push_back(static_cast<double>(r.propagation_steps));
    sx += static_cast<double>(r.propagation_steps);
    sy += r.propagation_time;
  }
  std::sort(steps.begin(), steps.end());
  if (std::unique(steps.begin(), steps.end()) - steps.begin() < 2)
    throw ValidationError("fit_scaling: need at least 2 distinct propagation step counts");
  const double n = static_cast<double>(records.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& r : records) {
    const double dx = static_cast<double>(r.propagation_steps) - mx, dy = r.propagation_time - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.propagation_r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : commands()) v.push_back(name);
    return v;
  }();
  return names;
}

int run(const std::string& subcommand, const CommandOptions& options) {
  const auto it = commands().find(subcommand);
  if (it == commands().end()) {
    std::cerr << "error: unknown subcommand '" << subcommand << "'\n";
    return 2;
  }
  Run r;
  r.threads = std::max(1u, options.threads);
  try {
    r.cfg = load_config(options.config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  r.out = options.out_dir ? fs::path(*options.out_dir) : fs::path(r.cfg.output.directory);
  std::error_code ec;
  fs::create_directories(r.out, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << r.out << ": " << ec.message() << '\n';
    return 1;
  }

  set_warning_sink([&r](const std::string& msg) {
    std::lock_guard<std::mutex> lock(r.warn_mutex);
    r.warnings.push_back(msg);
    std::cerr << "warning: " << msg << '\n';
  });
  int status = 0;
  std::string error;
  const auto start = Clock::now();
  try {
    it->second(r);
  } catch (const ConfigError& e) {
    status = 2;
    error = std::string("config error: ") + e.what();
  } catch (const std::exception& e) {
    status = 1;
    error = std::string("error: ") + e.what();
  }
  r.wall_times["total"] = seconds_since(start);
  set_warning_sink(nullptr);
  if (!error.empty()) std::cerr << error << '\n';
  write_manifest(r, subcommand, options.config_path, status, error);
  return status;
}

}  // namespace chaintensor::cli
