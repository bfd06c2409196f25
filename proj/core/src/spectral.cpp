#include "chaintensor/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace chaintensor {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double interpolate(const Tabulated& t, double omega) {
  if (omega < t.omega.front() || omega > t.omega.back()) return 0.0;
  const auto it = std::upper_bound(t.omega.begin(), t.omega.end(), omega);
  if (it == t.omega.end()) return t.value.back();
  const auto hi = static_cast<std::size_t>(it - t.omega.begin());
  const std::size_t lo = hi - 1;
  const double f = (omega - t.omega[lo]) / (t.omega[hi] - t.omega[lo]);
  return (1.0 - f) * t.value[lo] + f * t.value[hi];
}

}  // namespace

SpectralDensity::SpectralDensity(std::variant<DrudeLorentz, PowerLawExp, Tabulated> form, double hard_cutoff)
    : form_(std::move(form)), hard_cutoff_(hard_cutoff) {}

SpectralDensity SpectralDensity::drude_lorentz(double lambda, double gamma, double hard_cutoff) {
  require(std::isfinite(lambda) && lambda >= 0.0, "drude_lorentz: lambda must be >= 0");
  require(std::isfinite(gamma) && gamma > 0.0, "drude_lorentz: gamma must be > 0");
  require(std::isfinite(hard_cutoff) && hard_cutoff > 0.0, "hard cutoff must be > 0");
  return {DrudeLorentz{lambda, gamma}, hard_cutoff};
}

SpectralDensity SpectralDensity::power_law_exp(double lambda, double exponent, double cutoff, double hard_cutoff) {
  require(std::isfinite(lambda) && lambda >= 0.0, "power_law_exp: lambda must be >= 0");
  require(std::isfinite(exponent) && exponent > 0.0, "power_law_exp: exponent must be > 0");
  require(std::isfinite(cutoff) && cutoff > 0.0, "power_law_exp: cutoff must be > 0");
  require(std::isfinite(hard_cutoff) && hard_cutoff > 0.0, "hard cutoff must be > 0");
  return {PowerLawExp{lambda, exponent, cutoff}, hard_cutoff};
}

SpectralDensity SpectralDensity::tabulated(std::vector<double> omega, std::vector<double> value, double hard_cutoff) {
  require(omega.size() == value.size(), "tabulated: omega and J columns differ in length");
  require(omega.size() >= 2, "tabulated: need at least two grid points");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    require(std::isfinite(omega[i]) && std::isfinite(value[i]), "tabulated: non-finite entry");
    require(omega[i] >= 0.0, "tabulated: negative frequency in grid");
    require(value[i] >= 0.0, "tabulated: negative spectral density value");
    if (i > 0) require(omega[i] > omega[i - 1], "tabulated: frequency grid is not strictly increasing");
  }
  if (hard_cutoff <= 0.0) hard_cutoff = omega.back();
  require(std::isfinite(hard_cutoff), "hard cutoff must be finite");
  return {Tabulated{std::move(omega), std::move(value)}, hard_cutoff};
}

SpectralDensity SpectralDensity::load_csv(const std::filesystem::path& path, double hard_cutoff) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open spectral density file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "omega,J")
    throw ValidationError(path.string() + ": expected header 'omega,J'");
  std::vector<double> omega, value;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    try {
      omega.push_back(std::stod(line.substr(0, comma)));
      value.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return tabulated(std::move(omega), std::move(value), hard_cutoff);
}

SpectralDensity::Kind SpectralDensity::kind() const {
  switch (form_.index()) {
    case 0: return Kind::drude_lorentz;
    case 1: return Kind::power_law_exp;
    default: return Kind::tabulated;
  }
}

double SpectralDensity::operator()(double omega) const {
  if (!(omega >= 0.0)) throw DomainError("spectral density evaluated at negative frequency");
  if (omega > hard_cutoff_) return 0.0;
  return std::visit(
      [omega](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, DrudeLorentz>) {
          return f.lambda * f.gamma * omega / (omega * omega + f.gamma * f.gamma);
        } else if constexpr (std::is_same_v<T, PowerLawExp>) {
          if (omega == 0.0) return 0.0;
          return f.lambda * std::pow(omega, f.exponent) * std::exp(-omega / f.cutoff);
        } else {
          return interpolate(f, omega);
        }
      },
      form_);
}

bool SpectralDensity::is_null() const {
  return std::visit(
      [](const auto& f) -> bool {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Tabulated>) {
          return std::all_of(f.value.begin(), f.value.end(), [](double v) { return v == 0.0; });
        } else {
          return f.lambda == 0.0;
        }
      },
      form_);
}

double evaluate(const SpectralDensity& density, double omega) { return density(omega); }

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n == 0) throw ValidationError("gauss_legendre: order must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      if (n == 1) p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      // p1 = P_n(x), p0 = P_{n-1}(x)
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

double reorganization_energy(const SpectralDensity& density, double rel_tol) {
  if (const auto* tab = std::get_if<Tabulated>(&density.form())) {
    // Linear interpolation integrates exactly with the trapezoid rule on the
    // native grid, clipped at the hard cutoff.
    const double top = std::min(tab->omega.back(), density.hard_cutoff());
    double total = 0.0;
    for (std::size_t i = 1; i < tab->omega.size(); ++i) {
      const double a = tab->omega[i - 1];
      if (a >= top) break;
      const double b = std::min(tab->omega[i], top);
      total += 0.5 * (b - a) * (density(a) + density(b));
    }
    return total;
  }

  std::vector<double> x, w;
  gauss_legendre(20, x, w);
  auto panel = [&](double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * density(mid + half * x[i]);
    return s * half;
  };

  const double top = density.hard_cutoff();
  double coarse = 0.0;
  constexpr int kCoarse = 64;
  for (int i = 0; i < kCoarse; ++i) coarse += panel(top * i / kCoarse, top * (i + 1) / kCoarse);
  const double abs_tol = rel_tol * std::abs(coarse);

  struct Segment {
    double a, b, value;
    int depth;
  };
  std::vector<Segment> stack;
  for (int i = 0; i < kCoarse; ++i) {
    const double a = top * i / kCoarse, b = top * (i + 1) / kCoarse;
    stack.push_back({a, b, panel(a, b), 0});
  }
  double total = 0.0, achieved = 0.0;
  bool failed = false;
  while (!stack.empty()) {
    const Segment s = stack.back();
    stack.pop_back();
    const double m = 0.5 * (s.a + s.b);
    const double left = panel(s.a, m), right = panel(m, s.b);
    const double err = std::abs(left + right - s.value);
    const double local_tol = abs_tol * (s.b - s.a) / top;
    if (err <= local_tol || err <= 1e-15 * std::abs(left + right)) {
      total += left + right;
      achieved += err;
    } else if (s.depth >= 60) {
      total += left + right;
      achieved += err;
      failed = true;
    } else {
      stack.push_back({s.a, m, left, s.depth + 1});
      stack.push_back({m, s.b, right, s.depth + 1});
    }
  }
  if (failed && achieved > abs_tol) {
    std::ostringstream msg;
    msg << "reorganization_energy: quadrature did not converge, achieved relative tolerance "
        << achieved / std::max(std::abs(total), 1e-300);
    throw NumericalError(msg.str());
  }
  return total;
}

DiscreteMeasure discretize_measure(const SpectralDensity& density, std::size_t panels, std::size_t order) {
  if (order == 0) throw ValidationError("discretize_measure: order must be >= 1");
  std::vector<double> x, w;
  gauss_legendre(order, x, w);
  DiscreteMeasure m;

  if (const auto* tab = std::get_if<Tabulated>(&density.form())) {
    const double top = std::min(tab->omega.back(), density.hard_cutoff());
    for (std::size_t i = 1; i < tab->omega.size(); ++i) {
      const double a = tab->omega[i - 1];
      if (a >= top) break;
      const double b = std::min(tab->omega[i], top);
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (std::size_t j = 0; j < order; ++j) {
        const double om = mid + half * x[j];
        m.nodes.push_back(om);
        m.weights.push_back(w[j] * half * density(om) / kPi);
      }
    }
    return m;
  }

  if (panels == 0) throw ValidationError("discretize_measure: panels must be >= 1");
  const double top = density.hard_cutoff();
  m.nodes.reserve(panels * order);
  m.weights.reserve(panels * order);
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / static_cast<double>(panels);
    const double b = static_cast<double>(p + 1) / static_cast<double>(panels);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t j = 0; j < order; ++j) {
      const double u = mid + half * x[j];
      const double om = top * u * u;
      m.nodes.push_back(om);
      m.weights.push_back(w[j] * half * 2.0 * top * u * density(om) / kPi);
    }
  }
  return m;
}

ChainCoefficients stieltjes(const DiscreteMeasure& measure, std::size_t n) {
  const std::size_t m = measure.nodes.size();
  if (measure.weights.size() != m) throw ValidationError("stieltjes: nodes and weights differ in length");
  ChainCoefficients c;
  c.alpha.resize(n);
  c.beta.resize(n);
  if (n == 0) return c;

  const Eigen::Map<const RVector> x(measure.nodes.data(), static_cast<Eigen::Index>(m));
  const Eigen::Map<const RVector> w(measure.weights.data(), static_cast<Eigen::Index>(m));
  const double mass = w.sum();
  if (!(mass > 0.0)) throw ValidationError("stieltjes: degenerate (null) measure");

  RVector prev = RVector::Zero(static_cast<Eigen::Index>(m));
  RVector cur = RVector::Ones(static_cast<Eigen::Index>(m));
  double norm_cur = mass;  // <p_k, p_k>
  c.beta[0] = mass;
  for (std::size_t k = 0; k < n; ++k) {
    const double xp = (w.array() * x.array() * cur.array().square()).sum();
    c.alpha[k] = xp / norm_cur;
    if (k + 1 == n) break;
    RVector next = (x.array() - c.alpha[k]) * cur.array() - c.beta[k] * prev.array();
    const double norm_next = (w.array() * next.array().square()).sum();
    const double b = norm_next / norm_cur;
    if (!(b > 0.0) || !std::isfinite(b)) throw StabilityError("stieltjes: loss of positivity in beta", k + 1);
    c.beta[k + 1] = b;
    // Rescale both polynomials so the recurrence stays in floating-point range;
    // ratios of norms are unaffected.
    const double scale = 1.0 / std::sqrt(norm_next);
    prev = cur * scale;
    cur = next * scale;
    norm_cur = 1.0;
  }
  return c;
}

ChainCoefficients lanczos(const DiscreteMeasure& measure, std::size_t n) {
  const auto m = static_cast<Eigen::Index>(measure.nodes.size());
  if (static_cast<Eigen::Index>(measure.weights.size()) != m) throw ValidationError("lanczos: nodes and weights differ in length");
  ChainCoefficients c;
  c.alpha.resize(n);
  c.beta.resize(n);
  if (n == 0) return c;
  if (static_cast<Eigen::Index>(n) > m) throw ValidationError("lanczos: more coefficients requested than modes");

  const Eigen::Map<const RVector> x(measure.nodes.data(), m);
  const Eigen::Map<const RVector> w(measure.weights.data(), m);
  const double mass = w.sum();
  if (!(mass > 0.0)) throw ValidationError("lanczos: degenerate (null) measure");

  Eigen::MatrixXd q(m, static_cast<Eigen::Index>(n));
  q.col(0) = w.cwiseMax(0.0).cwiseSqrt() / std::sqrt(mass);
  c.beta[0] = mass;
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    RVector v = x.cwiseProduct(q.col(kk));
    c.alpha[k] = q.col(kk).dot(v);
    if (k + 1 == n) break;
    for (int pass = 0; pass < 2; ++pass) {
      const RVector proj = q.leftCols(kk + 1).transpose() * v;
      v -= q.leftCols(kk + 1) * proj;
    }
    const double b = v.squaredNorm();
    if (!(b > 0.0) || !std::isfinite(b)) throw StabilityError("lanczos: breakdown", k + 1);
    c.beta[k + 1] = b;
    q.col(kk + 1) = v / std::sqrt(b);
  }
  return c;
}

namespace {

// Doubles the quadrature behind `discretize` until no coefficient moves by
// more than rel_tol relative.
template <class Discretize>
ChainCoefficients converged_coefficients(const SpectralDensity& density, std::size_t n, const RecurrenceOptions& options,
                                         Discretize discretize) {
  if (n == 0) throw ValidationError("recurrence_coefficients: N must be >= 1");
  if (density.is_null()) throw ValidationError("recurrence_coefficients: degenerate (null) measure");

  const bool tabulated = density.kind() == SpectralDensity::Kind::tabulated;
  std::size_t panels = options.initial_panels;
  std::size_t order = tabulated ? std::max<std::size_t>(n + 2, options.order) : options.order;

  auto build = [&] {
    const DiscreteMeasure m = discretize(panels, order);
    double mass = 0.0;
    for (double v : m.weights) mass += v;
    if (!(mass > 0.0)) throw ValidationError("recurrence_coefficients: degenerate (null) measure");
    return stieltjes(m, n);
  };

  const double scale = density.hard_cutoff();
  auto close = [&](const ChainCoefficients& a, const ChainCoefficients& b) {
    for (std::size_t k = 0; k < n; ++k) {
      const double da = std::abs(a.alpha[k] - b.alpha[k]);
      const double db = std::abs(a.beta[k] - b.beta[k]);
      if (da > options.rel_tol * std::max(std::abs(a.alpha[k]), 1e-12 * scale)) return false;
      if (db > options.rel_tol * std::max(std::abs(a.beta[k]), 1e-24 * scale * scale)) return false;
    }
    return true;
  };

  ChainCoefficients current = build();
  while (true) {
    if (tabulated) order *= 2; else panels *= 2;
    const std::size_t nodes = tabulated ? order * std::get<Tabulated>(density.form()).omega.size() : panels * order;
    if (nodes > options.max_nodes)
      throw NumericalError("recurrence_coefficients: quadrature did not converge within node budget");
    ChainCoefficients refined = build();
    if (close(current, refined)) return refined;
    current = std::move(refined);
  }
}

}  // namespace

ChainCoefficients recurrence_coefficients(const SpectralDensity& density, std::size_t n,
                                          const RecurrenceOptions& options) {
  return converged_coefficients(density, n, options, [&](std::size_t panels, std::size_t order) {
    return discretize_measure(density, panels, order);
  });
}

DiscreteMeasure discretize_thermal_measure(const SpectralDensity& density, double beta, std::size_t panels,
                                           std::size_t order) {
  if (!(beta > 0.0)) throw ValidationError("discretize_thermal_measure: beta must be > 0");
  const DiscreteMeasure base = discretize_measure(density, panels, order);
  if (std::isinf(beta)) return base;
  DiscreteMeasure m;
  m.nodes.reserve(2 * base.nodes.size());
  m.weights.reserve(2 * base.nodes.size());
  for (std::size_t i = 0; i < base.nodes.size(); ++i) {
    const double om = base.nodes[i];
    if (!(om > 0.0)) continue;
    const double occ = 1.0 / std::expm1(beta * om);
    m.nodes.push_back(-om);
    m.weights.push_back(base.weights[i] * occ);
    m.nodes.push_back(om);
    m.weights.push_back(base.weights[i] * (occ + 1.0));
  }
  return m;
}

ChainCoefficients thermal_recurrence_coefficients(const SpectralDensity& density, double beta, std::size_t n,
                                                  const RecurrenceOptions& options) {
  return converged_coefficients(density, n, options, [&](std::size_t panels, std::size_t order) {
    return discretize_thermal_measure(density, beta, panels, order);
  });
}

ChainParameters map_to_thermofield_chain(const SpectralDensity& density, double beta, std::size_t length,
                                         const RecurrenceOptions& options) {
  if (density.is_null()) return ChainParameters::decoupled(length);
  return chain_hamiltonian(thermal_recurrence_coefficients(density, beta, length, options));
}

ChainParameters ChainParameters::decoupled(std::size_t length) {
  ChainParameters p;
  p.frequencies.assign(length, 0.0);
  p.hoppings.assign(length > 0 ? length - 1 : 0, 0.0);
  return p;
}

ChainParameters chain_hamiltonian(const ChainCoefficients& coefficients) {
  const std::size_t n = coefficients.size();
  if (coefficients.beta.size() != n) throw ValidationError("chain_hamiltonian: alpha and beta differ in length");
  if (n == 0) throw ValidationError("chain_hamiltonian: empty coefficient table");
  if (!(coefficients.beta[0] >= 0.0)) throw ValidationError("chain_hamiltonian: invalid coefficients, beta_0 < 0");
  ChainParameters p;
  p.system_coupling = std::sqrt(coefficients.beta[0]);
  p.frequencies = coefficients.alpha;
  for (std::size_t k = 1; k < n; ++k) {
    if (!(coefficients.beta[k] > 0.0))
      throw ValidationError("chain_hamiltonian: invalid coefficients, beta_" + std::to_string(k) + " <= 0");
    p.hoppings.push_back(std::sqrt(coefficients.beta[k]));
  }
  return p;
}

ChainParameters map_to_chain(const SpectralDensity& density, std::size_t length, const RecurrenceOptions& options) {
  if (density.is_null()) return ChainParameters::decoupled(length);
  return chain_hamiltonian(recurrence_coefficients(density, length, options));
}

}  // namespace chaintensor
