#include "chaintensor/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace chaintensor::io {

namespace {

using nlohmann::json;
constexpr char kMagic[8] = {'C', 'H', 'T', 'N', 'T', 'T', 'M', '1'};

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void units_line(std::ostream& out) { out << "# units: " << kUnitsNote << '\n'; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory, double t0) {
  auto out = open_out(path);
  units_line(out);
  const Eigen::Index d = trajectory.states.empty() ? 0 : trajectory.states.front().rows();
  out << 't';
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out << ",re_rho_" << i << j << ",im_rho_" << i << j;
  out << '\n';
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    out << num(t0 + static_cast<double>(k) * trajectory.dt);
    const CMatrix& rho = trajectory.states[k];
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << num(rho(i, j).real()) << ',' << num(rho(i, j).imag());
    out << '\n';
  }
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  bool header = false;
  std::vector<double> times;
  Trajectory tr;
  Eigen::Index d = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (!header) {
      if (cells.empty() || cells[0] != "t" || cells.size() % 2 != 1) throw ValidationError(path + ": bad trajectory header");
      d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>((cells.size() - 1) / 2))));
      if (static_cast<std::size_t>(2 * d * d + 1) != cells.size()) throw ValidationError(path + ": column count is not 1 + 2 d^2");
      header = true;
      continue;
    }
    if (static_cast<Eigen::Index>(cells.size()) != 2 * d * d + 1) throw ValidationError(path + ": ragged row");
    times.push_back(std::stod(cells[0]));
    CMatrix rho(d, d);
    std::size_t c = 1;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j, c += 2) rho(i, j) = Complex(std::stod(cells[c]), std::stod(cells[c + 1]));
    tr.states.push_back(std::move(rho));
  }
  if (!header || tr.states.empty()) throw ValidationError(path + ": no trajectory rows");
  tr.dt = times.size() > 1 ? times[1] - times[0] : 0.0;
  return tr;
}

void write_truncation_json(const std::string& path, const EvolutionResult& result, const ChainState* final_state) {
  json steps = json::array();
  double total = 0.0, leakage = 0.0;
  std::size_t max_bond = 0, clipped = 0;
  for (std::size_t k = 0; k < result.reports.size(); ++k) {
    const auto& r = result.reports[k];
    steps.push_back({{"step", k + 1},
                     {"discarded_weight", r.discarded_weight},
                     {"total_discarded", r.total_discarded()},
                     {"max_bond", r.max_bond},
                     {"floor_clipped", r.floor_clipped},
                     {"max_leakage", r.max_leakage}});
    total += r.total_discarded();
    max_bond = std::max(max_bond, r.max_bond);
    clipped += r.floor_clipped;
    leakage = std::max(leakage, r.max_leakage);
  }
  json doc = {{"units", kUnitsNote},
              {"dt", result.trajectory.dt},
              {"steps", result.reports.size()},
              {"cumulative_discarded_weight", total},
              {"max_bond", max_bond},
              {"floor_clipped", clipped},
              {"max_leakage", leakage},
              {"max_hermiticity_defect", result.max_hermiticity_defect},
              {"per_step", steps}};
  if (final_state != nullptr) {
    doc["final_bond_dims"] = final_state->bond_dims();
    doc["renormalization_drift"] = final_state->renormalization_drift();
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_tensor_container(const std::string& path, const TransferTensorSet& tensors) {
  const json header = {{"kind", "transfer_tensors"},
                       {"units", kUnitsNote},
                       {"d_sys", tensors.system_dim},
                       {"dt", tensors.dt},
                       {"M", tensors.size()},
                       {"K", tensors.cutoff},
                       {"decayed", tensors.decayed},
                       {"norms", tensors.norms}};
  const std::string text = header.dump();
  auto out = open_out(path, true);
  out.write(kMagic, sizeof kMagic);
  std::uint64_t len = text.size();
  for (int b = 0; b < 8; ++b) out.put(static_cast<char>((len >> (8 * b)) & 0xff));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors.tensors)
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        const double parts[2] = {t(i, j).real(), t(i, j).imag()};
        out.write(reinterpret_cast<const char*>(parts), sizeof parts);
      }
  if (!out) throw Error("write failed for " + path);
}

TransferTensorSet read_tensor_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw ValidationError(path + ": not a transfer tensor container");
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(in.get())) << (8 * b);
  if (!in || len > (std::uint64_t{1} << 30)) throw ValidationError(path + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const json header = json::parse(text);

  TransferTensorSet t;
  t.system_dim = header.at("d_sys").get<std::size_t>();
  t.dt = header.at("dt").get<double>();
  t.cutoff = header.at("K").get<std::size_t>();
  t.decayed = header.at("decayed").get<bool>();
  t.norms = header.at("norms").get<std::vector<double>>();
  const auto m = header.at("M").get<std::size_t>();
  const auto n = static_cast<Eigen::Index>(t.system_dim * t.system_dim);
  for (std::size_t k = 0; k < m; ++k) {
    CMatrix mat(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double parts[2];
        in.read(reinterpret_cast<char*>(parts), sizeof parts);
        mat(i, j) = Complex(parts[0], parts[1]);
      }
    if (!in) throw ValidationError(path + ": truncated tensor data");
    t.tensors.push_back(std::move(mat));
  }
  if (t.norms.size() != m || t.cutoff < 1 || t.cutoff > m) throw ValidationError(path + ": inconsistent header");
  return t;
}

void write_norms_csv(const std::string& path, const TransferTensorSet& tensors) {
  auto out = open_out(path);
  units_line(out);
  out << "t,norm\n";
  for (std::size_t k = 0; k < tensors.norms.size(); ++k)
    out << num(static_cast<double>(k + 1) * tensors.dt) << ',' << num(tensors.norms[k]) << '\n';
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum) {
  auto out = open_out(path);
  units_line(out);
  out << "omega,absorption\n";
  for (std::size_t k = 0; k < spectrum.omega.size(); ++k)
    out << num(spectrum.omega[k]) << ',' << num(spectrum.absorption[k]) << '\n';
}

void write_steady_csv(const std::string& path, const std::vector<double>& betas, const std::vector<double>& populations) {
  if (betas.size() != populations.size()) throw ValidationError("write_steady_csv: length mismatch");
  auto out = open_out(path);
  units_line(out);
  out << "beta,pop_excited\n";
  for (std::size_t k = 0; k < betas.size(); ++k) out << num(betas[k]) << ',' << num(populations[k]) << '\n';
}

void write_coefficients_csv(const std::string& path, const ChainCoefficients& coefficients, const ChainParameters& chain) {
  auto out = open_out(path);
  units_line(out);
  out << "n,alpha,beta,omega,eta\n";
  for (std::size_t n = 0; n < coefficients.size(); ++n) {
    const double eta = n == 0 ? chain.system_coupling : chain.hoppings[n - 1];
    out << n << ',' << num(coefficients.alpha[n]) << ',' << num(coefficients.beta[n]) << ','
        << num(chain.frequencies[n]) << ',' << num(eta) << '\n';
  }
}

}  // namespace chaintensor::io
