#include "chaintensor/tns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace chaintensor {

namespace {

using Site = ChainState::Site;
using Index = Eigen::Index;

CMatrix annihilation(std::size_t d) {
  CMatrix b = CMatrix::Zero(static_cast<Index>(d), static_cast<Index>(d));
  for (std::size_t n = 1; n < d; ++n) b(static_cast<Index>(n - 1), static_cast<Index>(n)) = std::sqrt(static_cast<double>(n));
  return b;
}

// M[(a + dx b), (a' + dx b')] = x(a, a') y(b, b'); x acts on the left site.
CMatrix two_site(const CMatrix& x, const CMatrix& y) {
  const Index dx = x.rows(), dy = y.rows();
  CMatrix m(dx * dy, dx * dy);
  for (Index b = 0; b < dy; ++b)
    for (Index bp = 0; bp < dy; ++bp) m.block(b * dx, bp * dx, dx, dx) = y(b, bp) * x;
  return m;
}

// exp(factor * h) for Hermitian h.
CMatrix hermitian_exp(const CMatrix& h, Complex factor) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()));
  const CVector e = (factor * es.eigenvalues().cast<Complex>()).array().exp();
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix as_wide(const Site& s) {
  return Eigen::Map<const CMatrix>(s.data.data(), s.left, s.local() * s.right);
}

void set_from_wide(Site& s, const CMatrix& wide, Index new_left) {
  s.left = new_left;
  s.data = Eigen::Map<const CMatrix>(wide.data(), new_left * s.local(), s.right);
}

// Apply `gate` to the physical (on_ancilla = false) or ancilla index pair of a
// two-site matrix theta with rows l + L(pA + PA aA) and cols pB + PB(aB + AB r).
void apply_pair_gate(CMatrix& theta, Index L, Index pa, Index aa, Index pb, Index ab, Index R, const CMatrix& gate,
                     bool on_ancilla) {
  const Index gdim = on_ancilla ? aa * ab : pa * pb;
  const Index other = on_ancilla ? L * pa * pb * R : L * aa * ab * R;
  CMatrix x(gdim, other);
  auto gidx = [&](Index pA, Index aA, Index pB, Index aB) { return on_ancilla ? aA + aa * aB : pA + pa * pB; };
  auto oidx = [&](Index l, Index pA, Index aA, Index pB, Index aB, Index r) {
    return on_ancilla ? l + L * (pA + pa * (pB + pb * r)) : l + L * (aA + aa * (aB + ab * r));
  };
  for (Index r = 0; r < R; ++r)
    for (Index aB = 0; aB < ab; ++aB)
      for (Index pB = 0; pB < pb; ++pB) {
        const Index col = pB + pb * (aB + ab * r);
        for (Index aA = 0; aA < aa; ++aA)
          for (Index pA = 0; pA < pa; ++pA)
            for (Index l = 0; l < L; ++l) x(gidx(pA, aA, pB, aB), oidx(l, pA, aA, pB, aB, r)) = theta(l + L * (pA + pa * aA), col);
      }
  const CMatrix y = gate * x;
  for (Index r = 0; r < R; ++r)
    for (Index aB = 0; aB < ab; ++aB)
      for (Index pB = 0; pB < pb; ++pB) {
        const Index col = pB + pb * (aB + ab * r);
        for (Index aA = 0; aA < aa; ++aA)
          for (Index pA = 0; pA < pa; ++pA)
            for (Index l = 0; l < L; ++l) theta(l + L * (pA + pa * aA), col) = y(gidx(pA, aA, pB, aB), oidx(l, pA, aA, pB, aB, r));
      }
}

void move_right(std::vector<Site>& sites, std::size_t i) {
  Site& a = sites[i];
  Site& b = sites[i + 1];
  Eigen::HouseholderQR<CMatrix> qr(a.data);
  const Index k = std::min(a.data.rows(), a.data.cols());
  CMatrix q = qr.householderQ() * CMatrix::Identity(a.data.rows(), k);
  CMatrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  a.data = std::move(q);
  a.right = k;
  const CMatrix wide = r * as_wide(b);
  set_from_wide(b, wide, k);
}

void move_left(std::vector<Site>& sites, std::size_t i) {
  Site& b = sites[i];
  Site& a = sites[i - 1];
  const CMatrix wide_adj = as_wide(b).adjoint();  // (S R) x L
  Eigen::HouseholderQR<CMatrix> qr(wide_adj);
  const Index k = std::min(wide_adj.rows(), wide_adj.cols());
  const CMatrix q = qr.householderQ() * CMatrix::Identity(wide_adj.rows(), k);
  const CMatrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const CMatrix new_wide = q.adjoint();  // k x (S R)
  set_from_wide(b, new_wide, k);
  a.data = a.data * r.adjoint();
  a.right = k;
}

CMatrix local_density_at_center(const Site& s) {
  // rho[p, p'] = sum_{l, a, r} C[l, p, a, r] conj(C[l, p', a, r])
  CMatrix x(s.phys, s.left * s.anc * s.right);
  for (Index r = 0; r < s.right; ++r)
    for (Index a = 0; a < s.anc; ++a)
      for (Index p = 0; p < s.phys; ++p)
        for (Index l = 0; l < s.left; ++l) x(p, l + s.left * (a + s.anc * r)) = s.data(l + s.left * (p + s.phys * a), r);
  return x * x.adjoint();
}

CMatrix block_of(const Site& s, Index local) { return s.data.block(s.left * local, 0, s.left, s.right); }

}  // namespace

void EvolutionConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("EvolutionConfig: " + m); };
  if (chain_length < 1) fail("chain length N must be >= 1");
  if (local_dim < 2) fail("local dimension d must be >= 2");
  if (system_dim < 1) fail("system dimension must be >= 1");
  if (max_bond < 1) fail("max bond chi must be >= 1");
  if (!(time_step > 0.0) || !std::isfinite(time_step)) fail("time step must be > 0");
  if (!(sv_floor >= 0.0 && sv_floor < 1.0)) fail("singular-value floor e0 must satisfy 0 <= e0 < 1");
  if (trotter_order != 2) fail("only second-order Trotter splitting is supported");
  if (!(beta >= 0.0)) fail("beta must be >= 0 (inf for vacuum)");
  if (imag_time_step < 0.0) fail("imaginary time step must be >= 0");
}

double TruncationReport::total_discarded() const {
  return std::accumulate(discarded_weight.begin(), discarded_weight.end(), 0.0);
}

ChainState::ChainState(std::vector<Site> sites, std::size_t system_site, std::size_t center)
    : sites_(std::move(sites)), system_site_(system_site), center_(center) {}

std::vector<std::size_t> ChainState::bond_dims() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < sites_.size(); ++i) out.push_back(static_cast<std::size_t>(sites_[i].right));
  return out;
}

double ChainState::norm() const { return sites_.empty() ? 0.0 : sites_[center_].data.norm(); }

LatticeHamiltonian build_lattice(const OpenSystemModel& model, std::size_t local_dim, bool bare) {
  if (model.baths.empty() || model.baths.size() > 2) throw ValidationError("build_lattice: one or two baths supported");
  const CMatrix& hs = model.system_hamiltonian;
  if (hs.rows() != hs.cols() || hs.rows() == 0) throw ValidationError("build_lattice: system Hamiltonian must be square");
  for (const auto& bath : model.baths) {
    if (bath.coupling.rows() != hs.rows() || bath.coupling.cols() != hs.cols())
      throw ValidationError("build_lattice: coupling operator dimension mismatch");
    if (bath.chain.length() < 1) throw ValidationError("build_lattice: chain length must be >= 1");
    if (bath.chain.hoppings.size() + 1 != bath.chain.length())
      throw ValidationError("build_lattice: chain needs N frequencies and N-1 hoppings");
  }
  const std::size_t n0 = model.baths[0].chain.length();
  const std::size_t n1 = model.baths.size() == 2 ? model.baths[1].chain.length() : 0;
  const std::size_t sys = n1;
  const std::size_t len = n1 + 1 + n0;
  const auto d = static_cast<Index>(local_dim);
  const Index ds = bare ? 1 : hs.rows();

  LatticeHamiltonian lat;
  lat.system_site = sys;
  lat.dims.assign(len, local_dim);
  lat.dims[sys] = static_cast<std::size_t>(ds);

  const CMatrix b = annihilation(local_dim);
  const CMatrix num = b.adjoint() * b;
  const CMatrix x = b + b.adjoint();

  auto chain_of = [&](std::size_t i) -> std::pair<std::size_t, std::size_t> {
    return i > sys ? std::pair{std::size_t{0}, i - sys - 1} : std::pair{std::size_t{1}, sys - 1 - i};
  };
  auto onsite = [&](std::size_t i) -> CMatrix {
    if (i == sys) return bare ? CMatrix::Zero(1, 1) : hs;
    const auto [c, n] = chain_of(i);
    return model.baths[c].chain.frequencies[n] * num;
  };
  auto bonds_at = [&](std::size_t i) { return static_cast<double>((i > 0 ? 1 : 0) + (i + 1 < len ? 1 : 0)); };

  for (std::size_t bnd = 0; bnd + 1 < len; ++bnd) {
    const std::size_t a = bnd, c = bnd + 1;
    const Index da = a == sys ? ds : d, dc = c == sys ? ds : d;
    CMatrix term = two_site(onsite(a) / bonds_at(a), CMatrix::Identity(dc, dc)) +
                   two_site(CMatrix::Identity(da, da), onsite(c) / bonds_at(c));
    if (a == sys) {
      if (!bare) term += model.baths[0].chain.system_coupling * two_site(model.baths[0].coupling, x);
    } else if (c == sys) {
      if (!bare) term += model.baths[1].chain.system_coupling * two_site(x, model.baths[1].coupling);
    } else {
      const auto [ch, na] = chain_of(a);
      const auto nc = chain_of(c).second;
      const double hop = model.baths[ch].chain.hoppings[std::min(na, nc)];
      term += hop * (two_site(b.adjoint(), b) + two_site(b, b.adjoint()));
    }
    lat.bond_terms.push_back(term.norm() == 0.0 ? CMatrix() : term);
  }
  return lat;
}

TebdPropagator::TebdPropagator(const OpenSystemModel& model, const EvolutionConfig& cfg)
    : TebdPropagator(build_lattice(model, cfg.local_dim, false),
                     cfg.disentangle_ancilla && std::isfinite(cfg.beta) ? build_lattice(model, cfg.local_dim, true)
                                                                         : LatticeHamiltonian{},
                     cfg) {
  if (static_cast<std::size_t>(model.system_hamiltonian.rows()) != cfg.system_dim)
    throw ValidationError("TebdPropagator: system Hamiltonian dimension does not match cfg.system_dim");
}

TebdPropagator::TebdPropagator(LatticeHamiltonian lattice, LatticeHamiltonian ancilla, const EvolutionConfig& cfg)
    : cfg_(cfg), lattice_(std::move(lattice)), ancilla_(std::move(ancilla)) {
  cfg_.validate();
  const double dt = cfg_.time_step;
  for (const auto& h : lattice_.bond_terms) {
    half_gates_.push_back(h.size() == 0 ? CMatrix() : hermitian_exp(h, -kI * (0.5 * dt)));
    full_gates_.push_back(h.size() == 0 ? CMatrix() : hermitian_exp(h, -kI * dt));
  }
  if (ancilla_.size() == lattice_.size()) {
    for (const auto& h : ancilla_.bond_terms) {
      anc_half_gates_.push_back(h.size() == 0 ? CMatrix() : hermitian_exp(h.conjugate(), kI * (0.5 * dt)));
      anc_full_gates_.push_back(h.size() == 0 ? CMatrix() : hermitian_exp(h.conjugate(), kI * dt));
    }
  }
}

TruncationReport TebdPropagator::step(ChainState& state) const {
  if (state.size() != lattice_.size()) throw ValidationError("TebdPropagator: state and lattice sizes differ");
  return step_with(state, half_gates_, full_gates_, anc_half_gates_, anc_full_gates_);
}

TruncationReport TebdPropagator::step_with(ChainState& state, const std::vector<CMatrix>& half,
                                           const std::vector<CMatrix>& full, const std::vector<CMatrix>& anc_half,
                                           const std::vector<CMatrix>& anc_full) const {
  auto& sites = state.sites_;
  const std::size_t len = sites.size();
  TruncationReport report;
  report.discarded_weight.assign(len > 0 ? len - 1 : 0, 0.0);

  auto check_leakage = [&](std::size_t i) {
    const Site& s = sites[i];
    if (i == state.system_site_ || s.phys < 2 || static_cast<std::size_t>(s.phys) != cfg_.local_dim) return;
    const CMatrix rho = local_density_at_center(s);
    const double top = rho(s.phys - 1, s.phys - 1).real() / std::max(rho.trace().real(), 1e-300);
    report.max_leakage = std::max(report.max_leakage, top);
  };

  // Bring the orthogonality center to the right end.
  check_leakage(state.center_);
  while (state.center_ + 1 < len) {
    move_right(sites, state.center_);
    ++state.center_;
    check_leakage(state.center_);
  }
  if (report.max_leakage > cfg_.leakage_threshold && !state.leakage_warned_) {
    std::ostringstream msg;
    msg << "occupancy leakage: top Fock level population " << report.max_leakage << " exceeds "
        << cfg_.leakage_threshold << "; increase the local dimension d";
    warn(msg.str());
    state.leakage_warned_ = true;
  }

  auto split = [&](std::size_t bond, CMatrix& theta, bool center_right) -> void {
    Site& a = sites[bond];
    Site& c = sites[bond + 1];
    const auto bytes = static_cast<std::size_t>(theta.rows()) * static_cast<std::size_t>(theta.cols()) * sizeof(Complex);
    if (bytes > cfg_.memory_budget_bytes)
      throw ResourceError("two-site update exceeds memory budget at bond " + std::to_string(bond));
    Eigen::BDCSVD<CMatrix> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& sv = svd.singularValues();
    if (!sv.allFinite()) throw NumericalError("non-finite singular values at bond " + std::to_string(bond));
    const double norm2 = sv.squaredNorm();
    if (!(norm2 > 0.0)) throw NumericalError("vanishing two-site tensor at bond " + std::to_string(bond));
    const double floor = cfg_.sv_floor * std::sqrt(norm2);
    const Index limit = std::min<Index>(sv.size(), static_cast<Index>(cfg_.max_bond));
    Index keep = 0;
    while (keep < limit && sv(keep) >= floor) ++keep;
    report.floor_clipped += static_cast<std::size_t>(limit - keep);
    keep = std::max<Index>(keep, 1);
    const double kept2 = sv.head(keep).squaredNorm();
    report.discarded_weight[bond] += std::max(0.0, 1.0 - kept2 / norm2);
    report.max_bond = std::max(report.max_bond, static_cast<std::size_t>(keep));

    const CMatrix u = svd.matrixU().leftCols(keep);
    const CMatrix vh = svd.matrixV().leftCols(keep).adjoint();
    const CVector s = sv.head(keep).cast<Complex>();
    if (center_right) {
      a.data = u;
      const CMatrix right = s.asDiagonal() * vh;
      c.data = Eigen::Map<const CMatrix>(right.data(), keep * c.local(), c.right);
    } else {
      a.data = u * s.asDiagonal();
      c.data = Eigen::Map<const CMatrix>(vh.data(), keep * c.local(), c.right);
    }
    a.right = keep;
    c.left = keep;
  };

  auto update = [&](std::size_t bond, const CMatrix& gate, const CMatrix* anc_gate, bool center_right) {
    Site& a = sites[bond];
    Site& c = sites[bond + 1];
    CMatrix theta = a.data * as_wide(c);  // (L SA) x (SB R)
    apply_pair_gate(theta, a.left, a.phys, a.anc, c.phys, c.anc, c.right, gate, false);
    if (anc_gate != nullptr && anc_gate->size() > 0) {
      // Bare terms use dimension 1 on the system site; expand with identity there.
      const std::size_t sys = state.system_site_;
      const Index ea = bond == sys ? 1 : a.anc, ec = bond + 1 == sys ? 1 : c.anc;
      const bool shapes_match = (bond == sys || a.anc == a.phys) && (bond + 1 == sys || c.anc == c.phys) &&
                                anc_gate->rows() == ea * ec;
      if (shapes_match) {
        CMatrix g = *anc_gate;
        if (bond == sys && a.anc > 1) g = two_site(CMatrix::Identity(a.anc, a.anc), g);
        if (bond + 1 == sys && c.anc > 1) g = two_site(g, CMatrix::Identity(c.anc, c.anc));
        apply_pair_gate(theta, a.left, a.phys, a.anc, c.phys, c.anc, c.right, g, true);
      }
    }
    split(bond, theta, center_right);
  };

  auto sweep_left = [&](int parity, const std::vector<CMatrix>& gates, const std::vector<CMatrix>& agates) {
    for (std::size_t bond = len - 1; bond-- > 0;) {
      if (static_cast<int>(bond % 2) == parity && gates[bond].size() > 0) {
        update(bond, gates[bond], agates.empty() ? nullptr : &agates[bond], false);
      } else {
        move_left(sites, bond + 1);
      }
    }
    state.center_ = 0;
  };
  auto sweep_right = [&](int parity, const std::vector<CMatrix>& gates, const std::vector<CMatrix>& agates) {
    for (std::size_t bond = 0; bond + 1 < len; ++bond) {
      if (static_cast<int>(bond % 2) == parity && gates[bond].size() > 0) {
        update(bond, gates[bond], agates.empty() ? nullptr : &agates[bond], true);
      } else {
        move_right(sites, bond);
      }
    }
    state.center_ = len - 1;
  };

  if (len >= 2) {
    sweep_left(0, half, anc_half);
    sweep_right(1, full, anc_full);
    sweep_left(0, half, anc_half);
  }

  Site& center = sites[state.center_];
  const double nrm = center.data.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("state norm vanished or diverged");
  if (&half == &half_gates_) state.renormalization_drift_ += std::abs(1.0 - nrm);
  center.data /= nrm;
  state.discarded_history_.push_back(report.total_discarded());
  return report;
}

TruncationReport trotter_step(ChainState& state, const TebdPropagator& propagator) { return propagator.step(state); }

ChainState thermal_environment(const OpenSystemModel& model, const EvolutionConfig& cfg) {
  cfg.validate();
  const LatticeHamiltonian bare = build_lattice(model, cfg.local_dim, true);
  const auto d = static_cast<Index>(cfg.local_dim);
  const bool vacuum = std::isinf(cfg.beta);
  std::vector<Site> sites;
  for (std::size_t i = 0; i < bare.size(); ++i) {
    Site s;
    if (i == bare.system_site) {
      s.data = CMatrix::Ones(1, 1);
    } else if (vacuum) {
      s.phys = d;
      s.data = CMatrix::Zero(d, 1);
      s.data(0, 0) = 1.0;
    } else {
      s.phys = d;
      s.anc = d;
      s.data = CMatrix::Zero(d * d, 1);
      for (Index n = 0; n < d; ++n) s.data(n + d * n, 0) = 1.0 / std::sqrt(static_cast<double>(d));
    }
    sites.push_back(std::move(s));
  }
  ChainState state(std::move(sites), bare.system_site, 0);
  if (vacuum || cfg.beta == 0.0) return state;

  const double tau_total = 0.5 * cfg.beta;
  const double target = cfg.imag_time_step > 0.0 ? cfg.imag_time_step : std::min(cfg.time_step, 0.01);
  const auto n = static_cast<std::size_t>(std::ceil(tau_total / target - 1e-12));
  const double tau = tau_total / static_cast<double>(n);

  EvolutionConfig imag_cfg = cfg;
  imag_cfg.disentangle_ancilla = false;
  TebdPropagator prop(bare, LatticeHamiltonian{}, imag_cfg);
  std::vector<CMatrix> half, full;
  for (const auto& h : bare.bond_terms) {
    half.push_back(h.size() == 0 ? CMatrix() : hermitian_exp(h, Complex(-0.5 * tau)));
    full.push_back(h.size() == 0 ? CMatrix() : hermitian_exp(h, Complex(-tau)));
  }
  // The infinite-temperature start fills every Fock level; leakage is judged
  // on the prepared state instead.
  state.leakage_warned_ = true;
  double discarded = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const TruncationReport r = prop.step_with(state, half, full, {}, {});
    discarded += r.total_discarded();
    if (discarded > cfg.preparation_tolerance) {
      std::ostringstream msg;
      msg << "thermal preparation did not converge: discarded weight " << discarded << " exceeds tolerance "
          << cfg.preparation_tolerance << " after " << (k + 1) << " of " << n << " imaginary steps; raise chi";
      throw PreparationError(msg.str());
    }
  }
  state.discarded_history_.clear();
  state.leakage_warned_ = false;
  return state;
}

ChainState with_system_state(ChainState environment, const CMatrix& rho_sys) {
  validate_density_matrix(rho_sys, 1e-8);
  const std::size_t sys = environment.system_site_;
  Site& s = environment.sites_.at(sys);
  if (s.left != 1 || s.right != 1) throw ValidationError("with_system_state: system site is entangled with the chain");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho_sys + rho_sys.adjoint()));
  std::vector<Index> kept;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > 1e-14) kept.push_back(i);
  const Index ds = rho_sys.rows();
  const auto rank = static_cast<Index>(kept.size());
  s.phys = ds;
  s.anc = rank;
  s.data = CMatrix::Zero(ds * rank, 1);
  double total = 0.0;
  for (Index i : kept) total += es.eigenvalues()(i);
  for (Index a = 0; a < rank; ++a) {
    const double w = std::sqrt(es.eigenvalues()(kept[static_cast<std::size_t>(a)]) / total);
    for (Index p = 0; p < ds; ++p) s.data(p + ds * a, 0) = w * es.eigenvectors()(p, kept[static_cast<std::size_t>(a)]);
  }
  // Keep the canonical form valid: the center must carry the whole norm.
  const double nrm = environment.sites_[environment.center_].data.norm();
  if (environment.center_ != sys) environment.sites_[environment.center_].data /= nrm;
  return environment;
}

ChainState initial_state(const EvolutionConfig& cfg, const CMatrix& rho_sys, const OpenSystemModel& model) {
  if (static_cast<std::size_t>(rho_sys.rows()) != cfg.system_dim)
    throw ValidationError("initial_state: rho_sys dimension does not match cfg.system_dim");
  return with_system_state(thermal_environment(model, cfg), rho_sys);
}

CMatrix reduced_site(const ChainState& state, std::size_t site) {
  const auto& sites = state.sites();
  if (site >= sites.size()) throw ValidationError("reduced_site: site index out of range");
  const Site& c = sites[site];
  if (state.center() == site) return local_density_at_center(c);

  CMatrix left = CMatrix::Ones(1, 1);
  for (std::size_t i = 0; i < site; ++i) {
    const Site& s = sites[i];
    CMatrix next = CMatrix::Zero(s.right, s.right);
    for (Index k = 0; k < s.local(); ++k) {
      const CMatrix blk = block_of(s, k);
      next.noalias() += blk.adjoint() * left * blk;
    }
    left = std::move(next);
  }
  CMatrix right = CMatrix::Ones(1, 1);
  for (std::size_t i = sites.size(); i-- > site + 1;) {
    const Site& s = sites[i];
    CMatrix next = CMatrix::Zero(s.left, s.left);
    for (Index k = 0; k < s.local(); ++k) {
      const CMatrix blk = block_of(s, k);
      next.noalias() += blk * right * blk.adjoint();
    }
    right = std::move(next);
  }
  CMatrix rho = CMatrix::Zero(c.phys, c.phys);
  for (Index a = 0; a < c.anc; ++a) {
    std::vector<CMatrix> lar;
    lar.reserve(static_cast<std::size_t>(c.phys));
    for (Index p = 0; p < c.phys; ++p) lar.push_back(left * block_of(c, p + c.phys * a) * right);
    for (Index p = 0; p < c.phys; ++p)
      for (Index q = 0; q < c.phys; ++q)
        rho(p, q) += (lar[static_cast<std::size_t>(p)].cwiseProduct(block_of(c, q + c.phys * a).conjugate())).sum();
  }
  return rho;
}

SystemReduction reduced_system(const ChainState& state) {
  SystemReduction out;
  const CMatrix rho = reduced_site(state, state.system_site());
  out.hermiticity_defect = (rho - rho.adjoint()).norm();
  out.rho = 0.5 * (rho + rho.adjoint());
  return out;
}

std::vector<double> site_occupations(const ChainState& state) {
  std::vector<double> occ;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const CMatrix rho = reduced_site(state, i);
    double n = 0.0;
    for (Index k = 0; k < rho.rows(); ++k) n += static_cast<double>(k) * rho(k, k).real();
    occ.push_back(n);
  }
  return occ;
}

EvolutionResult evolve(const TebdPropagator& propagator, ChainState state, std::size_t steps) {
  EvolutionResult result;
  result.trajectory.dt = propagator.config().time_step;
  result.trajectory.states.reserve(steps + 1);
  auto record = [&] {
    SystemReduction red = reduced_system(state);
    result.max_hermiticity_defect = std::max(result.max_hermiticity_defect, red.hermiticity_defect);
    result.trajectory.states.push_back(std::move(red.rho));
  };
  record();
  for (std::size_t k = 0; k < steps; ++k) {
    result.reports.push_back(propagator.step(state));
    record();
  }
  return result;
}

RecurrenceEstimate recurrence_probe(const ChainParameters& chain, const EvolutionConfig& cfg, double horizon,
                                    double threshold) {
  EvolutionConfig c = cfg;
  c.beta = std::numeric_limits<double>::infinity();
  c.validate();
  if (chain.length() < 1) throw ValidationError("recurrence_probe: empty chain");
  if (!(horizon > 0.0)) throw ValidationError("recurrence_probe: horizon must be > 0");
  const std::size_t len = chain.length();
  const auto d = static_cast<Index>(c.local_dim);

  RecurrenceEstimate est;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / c.time_step - 1e-9));
  if (len == 1) {
    est.occupation.assign(steps + 1, 1.0);
    est.time = horizon;
    return est;
  }

  const CMatrix b = annihilation(c.local_dim);
  const CMatrix num = b.adjoint() * b;
  const CMatrix id = CMatrix::Identity(d, d);
  LatticeHamiltonian lat;
  lat.dims.assign(len, c.local_dim);
  auto nb = [&](std::size_t i) { return static_cast<double>((i > 0 ? 1 : 0) + (i + 1 < len ? 1 : 0)); };
  for (std::size_t i = 0; i + 1 < len; ++i) {
    CMatrix term = two_site(chain.frequencies[i] / nb(i) * num, id) + two_site(id, chain.frequencies[i + 1] / nb(i + 1) * num) +
                   chain.hoppings[i] * (two_site(b.adjoint(), b) + two_site(b, b.adjoint()));
    lat.bond_terms.push_back(term.norm() == 0.0 ? CMatrix() : term);
  }
  std::vector<Site> sites;
  for (std::size_t i = 0; i < len; ++i) {
    Site s;
    s.phys = d;
    s.data = CMatrix::Zero(d, 1);
    s.data(i == 0 ? 1 : 0, 0) = 1.0;
    sites.push_back(std::move(s));
  }
  ChainState state(std::move(sites), 0, 0);
  TebdPropagator prop(lat, LatticeHamiltonian{}, c);

  auto first_site = [&] {
    const CMatrix rho = reduced_site(state, 0);
    double n = 0.0;
    for (Index k = 0; k < rho.rows(); ++k) n += static_cast<double>(k) * rho(k, k).real();
    return n;
  };
  est.occupation.push_back(first_site());
  const double level = threshold * est.occupation.front();
  bool decayed = false;
  for (std::size_t k = 1; k <= steps; ++k) {
    prop.step(state);
    est.occupation.push_back(first_site());
    const std::size_t m = k - 1;  // candidate local maximum at step m
    if (!decayed) {
      if (est.occupation[k] < level) decayed = true;
      continue;
    }
    if (m >= 1 && est.occupation[m] > level && est.occupation[m] >= est.occupation[m - 1] &&
        est.occupation[m] > est.occupation[k]) {
      // Parabolic refinement through the three samples around the maximum.
      const double y0 = est.occupation[m - 1], y1 = est.occupation[m], y2 = est.occupation[k];
      const double denom = y0 - 2.0 * y1 + y2;
      const double shift = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
      est.time = (static_cast<double>(m) + shift) * c.time_step;
      est.found = true;
      return est;
    }
  }
  est.time = horizon;
  return est;
}

}  // namespace chaintensor
