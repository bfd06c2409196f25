#include "chaintensor/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace chaintensor::cli {

namespace {

using nlohmann::json;

std::string join(const std::string& parent, const std::string& key) { return parent.empty() ? key : parent + "." + key; }

const json& object_at(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw ConfigError(path, "expected an object");
  return doc;
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ConfigError(join(path, key), "unknown field");
}

const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(join(path, key), "required field is missing");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
    return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number");
  return x;
}

double positive(const json& obj, const std::string& path, const std::string& key) {
  const double x = number(field(obj, path, key), join(path, key));
  if (!(x > 0.0)) throw ConfigError(join(path, key), "must be > 0");
  return x;
}

double non_negative(const json& obj, const std::string& path, const std::string& key) {
  const double x = number(field(obj, path, key), join(path, key));
  if (!(x >= 0.0)) throw ConfigError(join(path, key), "must be >= 0");
  return x;
}

double optional_number(const json& obj, const std::string& path, const std::string& key, double fallback) {
  return obj.contains(key) ? number(obj.at(key), join(path, key)) : fallback;
}

std::size_t count(const json& v, const std::string& path, std::size_t min_value) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(path, "expected an integer");
  const auto x = v.get<long long>();
  if (x < static_cast<long long>(min_value)) throw ConfigError(path, "must be >= " + std::to_string(min_value));
  return static_cast<std::size_t>(x);
}

std::size_t required_count(const json& obj, const std::string& path, const std::string& key, std::size_t min_value) {
  return count(field(obj, path, key), join(path, key), min_value);
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

SpectralSection parse_spectral(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path, {"kind", "params", "omega_hc"});
  SpectralSection s;
  const json& kind = field(doc, path, "kind");
  if (!kind.is_string()) throw ConfigError(join(path, "kind"), "expected a string");
  s.kind = kind.get<std::string>();
  const std::string ppath = join(path, "params");
  const json& p = object_at(field(doc, path, "params"), ppath);
  try {
    if (s.kind == "drude_lorentz") {
      reject_unknown(p, ppath, {"lambda", "gamma"});
      s.density = SpectralDensity::drude_lorentz(non_negative(p, ppath, "lambda"), positive(p, ppath, "gamma"),
                                                 positive(doc, path, "omega_hc"));
    } else if (s.kind == "power_law_exp") {
      reject_unknown(p, ppath, {"lambda", "exponent", "omega_c"});
      s.density = SpectralDensity::power_law_exp(non_negative(p, ppath, "lambda"), positive(p, ppath, "exponent"),
                                                 positive(p, ppath, "omega_c"), positive(doc, path, "omega_hc"));
    } else if (s.kind == "tabulated") {
      reject_unknown(p, ppath, {"file", "omega", "J"});
      const double hc = doc.contains("omega_hc") ? positive(doc, path, "omega_hc") : 0.0;
      if (p.contains("file")) {
        if (!p.at("file").is_string()) throw ConfigError(join(ppath, "file"), "expected a path string");
        s.density = SpectralDensity::load_csv(p.at("file").get<std::string>(), hc);
      } else {
        s.density = SpectralDensity::tabulated(number_list(field(p, ppath, "omega"), join(ppath, "omega")),
                                               number_list(field(p, ppath, "J"), join(ppath, "J")), hc);
      }
    } else {
      throw ConfigError(join(path, "kind"), "must be drude_lorentz, power_law_exp or tabulated");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(ppath, e.what());
  }
  return s;
}

ChainSection parse_chain(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path, {"N", "d"});
  return {required_count(doc, path, "N", 1), required_count(doc, path, "d", 2)};
}

TebdSection parse_tebd(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path,
                 {"chi", "dt", "e0", "steps", "imag_dt", "preparation_tolerance", "disentangle_ancilla"});
  TebdSection t;
  t.max_bond = required_count(doc, path, "chi", 1);
  t.dt = positive(doc, path, "dt");
  t.sv_floor = optional_number(doc, path, "e0", t.sv_floor);
  if (!(t.sv_floor >= 0.0 && t.sv_floor < 1.0)) throw ConfigError(join(path, "e0"), "must satisfy 0 <= e0 < 1");
  t.steps = doc.contains("steps") ? count(doc.at("steps"), join(path, "steps"), 0) : 0;
  t.imag_time_step = optional_number(doc, path, "imag_dt", 0.0);
  if (t.imag_time_step < 0.0) throw ConfigError(join(path, "imag_dt"), "must be >= 0");
  t.preparation_tolerance = optional_number(doc, path, "preparation_tolerance", t.preparation_tolerance);
  if (doc.contains("disentangle_ancilla")) {
    if (!doc.at("disentangle_ancilla").is_boolean()) throw ConfigError(join(path, "disentangle_ancilla"), "expected a boolean");
    t.disentangle_ancilla = doc.at("disentangle_ancilla").get<bool>();
  }
  return t;
}

TtmSection parse_ttm(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path,
                 {"learn_steps", "threshold", "K_override", "propagate_steps", "tensors", "history", "history_rows"});
  TtmSection t;
  t.learn_steps = required_count(doc, path, "learn_steps", 1);
  t.threshold = optional_number(doc, path, "threshold", t.threshold);
  if (!(t.threshold > 0.0)) throw ConfigError(join(path, "threshold"), "must be > 0");
  if (doc.contains("K_override") && !doc.at("K_override").is_null()) {
    t.cutoff_override = count(doc.at("K_override"), join(path, "K_override"), 1);
    if (*t.cutoff_override > t.learn_steps) throw ConfigError(join(path, "K_override"), "must not exceed learn_steps");
  }
  t.propagate_steps = doc.contains("propagate_steps") ? count(doc.at("propagate_steps"), join(path, "propagate_steps"), 0) : 0;
  for (auto [key, target] : {std::pair{"tensors", &t.tensors_path}, std::pair{"history", &t.history_path}}) {
    if (!doc.contains(key)) continue;
    if (!doc.at(key).is_string()) throw ConfigError(join(path, key), "expected a path string");
    *target = doc.at(key).get<std::string>();
  }
  if (doc.contains("history_rows")) t.history_rows = count(doc.at("history_rows"), join(path, "history_rows"), 1);
  return t;
}

CMatrix parse_matrix(const json& v, const std::string& path, Eigen::Index dim) {
  object_at(v, path);
  reject_unknown(v, path, {"re", "im"});
  CMatrix m = CMatrix::Zero(dim, dim);
  for (const char* part : {"re", "im"}) {
    if (!v.contains(part)) {
      if (std::string(part) == "re") throw ConfigError(join(path, "re"), "required field is missing");
      continue;
    }
    const json& rows = v.at(part);
    const std::string ppath = join(path, part);
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != dim)
      throw ConfigError(ppath, "expected " + std::to_string(dim) + " rows");
    for (Eigen::Index i = 0; i < dim; ++i) {
      const auto row = number_list(rows[static_cast<std::size_t>(i)], ppath + "[" + std::to_string(i) + "]");
      if (static_cast<Eigen::Index>(row.size()) != dim) throw ConfigError(ppath, "row length must equal the system dimension");
      for (Eigen::Index j = 0; j < dim; ++j)
        m(i, j) += std::string(part) == "re" ? Complex(row[static_cast<std::size_t>(j)], 0.0) : Complex(0.0, row[static_cast<std::size_t>(j)]);
    }
  }
  try {
    validate_density_matrix(m, 1e-8);
  } catch (const ValidationError& e) {
    throw ConfigError(path, e.what());
  }
  return m;
}

ModelSection parse_model(const json& doc, const std::string& path) {
  object_at(doc, path);
  ModelSection m;
  const json& type = field(doc, path, "type");
  if (!type.is_string()) throw ConfigError(join(path, "type"), "expected a string");
  const std::string t = type.get<std::string>();
  if (t == "monomer") {
    reject_unknown(doc, path, {"type", "epsilon", "delta", "beta", "thermal_method", "initial_state"});
    m.type = ModelType::monomer;
    m.monomer.epsilon = number(field(doc, path, "epsilon"), join(path, "epsilon"));
    m.monomer.delta = number(field(doc, path, "delta"), join(path, "delta"));
  } else if (t == "dimer") {
    reject_unknown(doc, path,
                   {"type", "epsilon1", "epsilon2", "exchange", "mu1", "mu2", "beta", "thermal_method", "initial_state"});
    m.type = ModelType::dimer;
    m.dimer.epsilon1 = number(field(doc, path, "epsilon1"), join(path, "epsilon1"));
    m.dimer.epsilon2 = number(field(doc, path, "epsilon2"), join(path, "epsilon2"));
    m.dimer.exchange = number(field(doc, path, "exchange"), join(path, "exchange"));
    m.dimer.mu1 = number(field(doc, path, "mu1"), join(path, "mu1"));
    m.dimer.mu2 = number(field(doc, path, "mu2"), join(path, "mu2"));
  } else {
    throw ConfigError(join(path, "type"), "must be monomer or dimer");
  }
  m.beta = number(field(doc, path, "beta"), join(path, "beta"));
  if (!(m.beta >= 0.0)) throw ConfigError(join(path, "beta"), "must be >= 0 or \"inf\"");
  if (doc.contains("thermal_method")) {
    const json& tm = doc.at("thermal_method");
    const std::string v = tm.is_string() ? tm.get<std::string>() : "";
    if (v == "purification") m.thermal_method = ThermalMethod::purification;
    else if (v == "thermofield") m.thermal_method = ThermalMethod::thermofield;
    else throw ConfigError(join(path, "thermal_method"), "must be purification or thermofield");
    if (m.thermal_method == ThermalMethod::thermofield && m.beta == 0.0)
      throw ConfigError(join(path, "beta"), "thermofield needs beta > 0");
  }
  const Eigen::Index dim = m.type == ModelType::monomer ? 2 : 3;
  if (!doc.contains("initial_state")) {
    m.initial_state = m.type == ModelType::monomer ? SpinBosonParams::excited_projector() : DimerParams::ground_state();
  } else if (doc.at("initial_state").is_string()) {
    const std::string s = doc.at("initial_state").get<std::string>();
    m.initial_state = CMatrix::Zero(dim, dim);
    if (s == "ground") m.initial_state(m.type == ModelType::monomer ? 1 : 0, m.type == ModelType::monomer ? 1 : 0) = 1.0;
    else if (s == "excited" && m.type == ModelType::monomer) m.initial_state(0, 0) = 1.0;
    else throw ConfigError(join(path, "initial_state"), "must be \"ground\", \"excited\" (monomer) or a {re, im} matrix");
  } else {
    m.initial_state = parse_matrix(doc.at("initial_state"), join(path, "initial_state"), dim);
  }
  return m;
}

OutputSection parse_output(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path, {"directory", "formats"});
  OutputSection o;
  if (doc.contains("directory")) {
    if (!doc.at("directory").is_string()) throw ConfigError(join(path, "directory"), "expected a string");
    o.directory = doc.at("directory").get<std::string>();
  }
  if (doc.contains("formats")) {
    const json& f = doc.at("formats");
    if (!f.is_array()) throw ConfigError(join(path, "formats"), "expected an array of strings");
    o.formats.clear();
    for (const auto& x : f) {
      if (!x.is_string() || (x.get<std::string>() != "csv" && x.get<std::string>() != "json"))
        throw ConfigError(join(path, "formats"), "entries must be \"csv\" or \"json\"");
      o.formats.push_back(x.get<std::string>());
    }
  }
  return o;
}

BenchSection parse_bench(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path, {"t_bath", "t_sim", "repetitions", "velocity"});
  BenchSection b;
  b.t_bath = number_list(field(doc, path, "t_bath"), join(path, "t_bath"));
  if (b.t_bath.size() < 4) throw ConfigError(join(path, "t_bath"), "need at least 4 grid points");
  for (double t : b.t_bath)
    if (!(t > 0.0)) throw ConfigError(join(path, "t_bath"), "entries must be > 0");
  if (doc.contains("t_sim")) {
    b.t_sim = number_list(doc.at("t_sim"), join(path, "t_sim"));
    if (b.t_sim.size() != b.t_bath.size()) throw ConfigError(join(path, "t_sim"), "must have one entry per t_bath");
  } else {
    for (double t : b.t_bath) b.t_sim.push_back(100.0 * t);
  }
  b.repetitions = doc.contains("repetitions") ? count(doc.at("repetitions"), join(path, "repetitions"), 1) : 1;
  b.velocity = positive(doc, path, "velocity");
  return b;
}

SpectrumSection parse_spectrum(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path, {"tau_steps", "window", "omega_min", "omega_max"});
  SpectrumSection s;
  s.tau_steps = required_count(doc, path, "tau_steps", 2);
  if (doc.contains("window")) {
    const std::string w = doc.at("window").is_string() ? doc.at("window").get<std::string>() : "";
    if (w == "hann") s.window = Window::hann;
    else if (w == "rectangular" || w == "none") s.window = Window::rectangular;
    else throw ConfigError(join(path, "window"), "must be hann or rectangular");
  }
  s.omega_min = optional_number(doc, path, "omega_min", 0.0);
  s.omega_max = optional_number(doc, path, "omega_max", -1.0);
  return s;
}

SteadySection parse_steady(const json& doc, const std::string& path) {
  object_at(doc, path);
  reject_unknown(doc, path, {"betas", "tolerance", "window", "max_steps"});
  SteadySection s;
  s.betas = number_list(field(doc, path, "betas"), join(path, "betas"));
  for (double b : s.betas)
    if (!(b > 0.0)) throw ConfigError(join(path, "betas"), "entries must be > 0");
  s.tolerance = optional_number(doc, path, "tolerance", s.tolerance);
  if (!(s.tolerance > 0.0)) throw ConfigError(join(path, "tolerance"), "must be > 0");
  if (doc.contains("window")) s.window = count(doc.at("window"), join(path, "window"), 1);
  if (doc.contains("max_steps")) s.max_steps = count(doc.at("max_steps"), join(path, "max_steps"), 1);
  return s;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<document>", "expected a JSON object");
  reject_unknown(doc, "", {"spectral", "chain", "tebd", "ttm", "model", "output", "bench", "spectrum", "steady"});
  RunConfig cfg;
  cfg.source_text = text;
  if (doc.contains("spectral")) cfg.spectral = parse_spectral(doc.at("spectral"), "spectral");
  if (doc.contains("chain")) cfg.chain = parse_chain(doc.at("chain"), "chain");
  if (doc.contains("tebd")) cfg.tebd = parse_tebd(doc.at("tebd"), "tebd");
  if (doc.contains("ttm")) cfg.ttm = parse_ttm(doc.at("ttm"), "ttm");
  if (doc.contains("model")) cfg.model = parse_model(doc.at("model"), "model");
  if (doc.contains("output")) cfg.output = parse_output(doc.at("output"), "output");
  if (doc.contains("bench")) cfg.bench = parse_bench(doc.at("bench"), "bench");
  if (doc.contains("spectrum")) cfg.spectrum = parse_spectrum(doc.at("spectrum"), "spectrum");
  if (doc.contains("steady")) cfg.steady = parse_steady(doc.at("steady"), "steady");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

const SpectralSection& require_spectral(const RunConfig& cfg) {
  if (!cfg.spectral) throw ConfigError("spectral", "section is required for this subcommand");
  return *cfg.spectral;
}
const ChainSection& require_chain(const RunConfig& cfg) {
  if (!cfg.chain) throw ConfigError("chain", "section is required for this subcommand");
  return *cfg.chain;
}
const TebdSection& require_tebd(const RunConfig& cfg) {
  if (!cfg.tebd) throw ConfigError("tebd", "section is required for this subcommand");
  return *cfg.tebd;
}
const TtmSection& require_ttm(const RunConfig& cfg) {
  if (!cfg.ttm) throw ConfigError("ttm", "section is required for this subcommand");
  return *cfg.ttm;
}
const ModelSection& require_model(const RunConfig& cfg) {
  if (!cfg.model) throw ConfigError("model", "section is required for this subcommand");
  return *cfg.model;
}

}  // namespace chaintensor::cli
