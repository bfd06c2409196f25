#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "chaintensor/cli/commands.hpp"
#include "chaintensor/cli/config.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace chaintensor;
using namespace chaintensor::cli;

namespace {

std::string config_error_path(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "chaintensor_cli_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<BenchRecord> synthetic(const std::function<double(double)>& tw) {
  std::vector<BenchRecord> out;
  for (double t : {2.5, 5.0, 7.5, 10.0}) {
    BenchRecord r;
    r.t_bath = t;
    r.wall_time = tw(t);
    r.propagation_steps = static_cast<std::size_t>(100 * t);
    r.propagation_time = 1e-6 * static_cast<double>(r.propagation_steps) + 1e-4;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("config sections parse into typed values") {
  const auto cfg = parse_config_text(R"({
    "spectral": {"kind": "power_law_exp", "params": {"lambda": 1.8, "exponent": 3, "omega_c": 0.3}, "omega_hc": 10},
    "chain": {"N": 40, "d": 4},
    "tebd": {"chi": 32, "dt": 0.1, "steps": 10},
    "ttm": {"learn_steps": 100, "K_override": 50},
    "model": {"type": "monomer", "epsilon": 1, "delta": 0.6, "beta": "inf"},
    "output": {"directory": "x", "formats": ["csv"]}
  })");
  REQUIRE(cfg.spectral);
  CHECK(cfg.spectral->density(1.0) == doctest::Approx(1.8 * std::exp(-1.0 / 0.3)));
  CHECK(cfg.chain->length == 40);
  CHECK(cfg.tebd->sv_floor == 1e-10);
  CHECK(*cfg.ttm->cutoff_override == 50);
  CHECK(std::isinf(cfg.model->beta));
  CHECK(cfg.model->initial_state(0, 0) == Complex(1.0));
  CHECK(cfg.output.formats == std::vector<std::string>{"csv"});
  CHECK_FALSE(cfg.bench);
}

TEST_CASE("schema violations name the offending field") {
  CHECK(config_error_path(R"({"chain": {"N": 0, "d": 4}})") == "chain.N");
  CHECK(config_error_path(R"({"chain": {"N": 3}})") == "chain.d");
  CHECK(config_error_path(R"({"tebd": {"chi": 8, "dt": -0.1}})") == "tebd.dt");
  CHECK(config_error_path(R"({"tebd": {"chi": 8, "dt": 0.1, "e0": 2}})") == "tebd.e0");
  CHECK(config_error_path(R"({"chian": {}})") == "chian");
  CHECK(config_error_path(R"({"model": {"type": "trimer", "beta": 1}})") == "model.type");
  CHECK(config_error_path(R"({"model": {"type": "monomer", "epsilon": 1, "beta": 1}})") == "model.delta");
  CHECK(config_error_path(R"({"spectral": {"kind": "drude_lorentz", "params": {"lambda": 1, "gamma": 10}}})") ==
        "spectral.omega_hc");
  CHECK(config_error_path(R"({"spectral": {"kind": "tabulated", "params": {"omega": [0, 2, 1], "J": [1, 1, 1]}}})") ==
        "spectral.params");
  CHECK(config_error_path(R"({"ttm": {"learn_steps": 10, "K_override": 11}})") == "ttm.K_override");
  CHECK(config_error_path(R"({"bench": {"t_bath": [1, 2, 3], "velocity": 5}})") == "bench.t_bath");
  CHECK(config_error_path("{not json") == "<document>");
  CHECK(config_error_path(R"({"model": {"type": "monomer", "epsilon": 1, "delta": 0.6, "beta": 1,
      "initial_state": {"re": [[1, 0], [0, 1]]}}})") == "model.initial_state");
}

TEST_CASE("fit_scaling recovers an exact quadratic") {
  const auto fit = fit_scaling(synthetic([](double t) { return 3.0 * t * t; }));
  CHECK(fit.c == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(fit.residual_structure);
  CHECK(fit.slope == doctest::Approx(1e-6).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(1e-4).epsilon(1e-9));
}

TEST_CASE("fit_scaling flags a linear contamination") {
  const auto exact = fit_scaling(synthetic([](double t) { return 3.0 * t * t; }));
  const auto fit = fit_scaling(synthetic([](double t) { return 3.0 * t * t + 0.1 * t; }));
  CHECK(fit.r_squared < exact.r_squared);
  CHECK(fit.residual_structure);
  CHECK(fit.c > 3.0);
}

TEST_CASE("fit_scaling rejects degenerate grids") {
  auto recs = synthetic([](double t) { return t * t; });
  recs.pop_back();
  CHECK_THROWS_AS(fit_scaling(recs), ValidationError);
  recs = synthetic([](double t) { return t * t; });
  recs[3].t_bath = recs[2].t_bath;
  CHECK_THROWS_AS(fit_scaling(recs), ValidationError);
}

TEST_CASE("chain-map on a uniform weight writes shifted-Legendre coefficients") {
  const auto dir = scratch_dir("chain_map");
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"spectral": {"kind": "tabulated", "params": {"omega": [0, 1], "J": [3.141592653589793, 3.141592653589793]}},
                           "chain": {"N": 6, "d": 2}})";
  CHECK(run("chain-map", {cfg.string(), (dir / "out").string(), 1}) == 0);
  std::ifstream in(dir / "out" / "coefficients.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line == "n,alpha,beta,omega,eta");
  std::vector<double> beta;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    CHECK(std::abs(v[1] - 0.5) < 1e-12);
    beta.push_back(v[2]);
  }
  REQUIRE(beta.size() == 6);
  CHECK(std::abs(beta[1] - 1.0 / 12.0) < 1e-12);
  CHECK(std::abs(beta[2] - 1.0 / 15.0) < 1e-12);
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "out" / "run_manifest.json"));
  CHECK(manifest.at("exit_status") == 0);
  CHECK(manifest.at("config").at("chain").at("N") == 6);
}

TEST_CASE("configuration errors exit with status 2") {
  const auto dir = scratch_dir("bad");
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"chain": {"N": 6, "d": 2}})";
  CHECK(run("chain-map", {cfg.string(), (dir / "out").string(), 1}) == 2);
  CHECK(run("no-such-command", {cfg.string(), (dir / "out").string(), 1}) == 2);
}

TEST_CASE("learn then propagate with full memory reproduces the training rows") {
  const auto dir = scratch_dir("learn");
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({
    "spectral": {"kind": "power_law_exp", "params": {"lambda": 1.8, "exponent": 3, "omega_c": 0.3}, "omega_hc": 10},
    "chain": {"N": 4, "d": 3},
    "tebd": {"chi": 16, "dt": 0.1},
    "ttm": {"learn_steps": 12, "propagate_steps": 12, "history_rows": 1, "K_override": 12},
    "model": {"type": "monomer", "epsilon": 1, "delta": 0.6, "beta": "inf"}
  })";
  const std::string out = (dir / "out").string();
  REQUIRE(run("learn", {cfg.string(), out, 2}) == 0);
  REQUIRE(run("propagate", {cfg.string(), out, 1}) == 0);
  auto rows = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> v;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') v.push_back(line);
    return v;
  };
  const auto train = rows(dir / "out" / "training_trajectory.csv");
  const auto prop = rows(dir / "out" / "propagated_trajectory.csv");
  REQUIRE(train.size() == 14);
  REQUIRE(prop.size() == 14);
  std::size_t identical = 0;
  double worst = 0.0;
  for (std::size_t i = 1; i < train.size(); ++i) {
    if (train[i] == prop[i]) ++identical;
    std::stringstream a(train[i]), b(prop[i]);
    std::string x, y;
    while (std::getline(a, x, ',') && std::getline(b, y, ',')) worst = std::max(worst, std::abs(std::stod(x) - std::stod(y)));
  }
  CHECK(worst < 1e-12);
  MESSAGE("bitwise identical rows: " << identical << " of " << train.size() - 1);
}
