#include <cmath>

#include "chaintensor/oracle.hpp"
#include "chaintensor/ttm.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chaintensor;

namespace {

oracle::LindbladGenerator qubit_lindblad(double dephasing, double damping) {
  const CMatrix h = 0.5 * testing::pauli_z() + 0.3 * testing::pauli_x();
  CMatrix lower = CMatrix::Zero(2, 2);
  lower(1, 0) = 1.0;
  return oracle::LindbladGenerator::build(h, {testing::pauli_z(), lower}, {dephasing, damping});
}

std::vector<Trajectory> unitary_trajectories(const CMatrix& h, double dt, std::size_t steps) {
  const CMatrix u = unitary_propagator(h, dt);
  std::vector<Trajectory> out;
  for (const auto& p : preparation_states(static_cast<std::size_t>(h.rows()))) {
    Trajectory t;
    t.dt = dt;
    t.states.push_back(p);
    for (std::size_t k = 0; k < steps; ++k) t.states.push_back(u * t.states.back() * u.adjoint());
    out.push_back(std::move(t));
  }
  return out;
}

TransferTensorSet synthetic_set(const std::vector<double>& norms) {
  TransferTensorSet t;
  t.dt = 0.1;
  t.system_dim = 2;
  for (double n : norms) {
    t.tensors.push_back(CMatrix::Identity(4, 4) * (n / 2.0));
    t.norms.push_back(n);
  }
  t.cutoff = norms.size();
  return t;
}

}  // namespace

TEST_CASE("preparation states are physical and span the operator space") {
  for (std::size_t d : {2, 3, 4}) {
    const auto preps = preparation_states(d);
    REQUIRE(preps.size() == d * d);
    CMatrix r(static_cast<Eigen::Index>(d * d), static_cast<Eigen::Index>(d * d));
    for (std::size_t i = 0; i < preps.size(); ++i) {
      CHECK_NOTHROW(validate_density_matrix(preps[i], 1e-12));
      r.col(static_cast<Eigen::Index>(i)) = vectorize(preps[i]);
    }
    CHECK(Eigen::FullPivLU<CMatrix>(r).rank() == static_cast<Eigen::Index>(d * d));
  }
}

TEST_CASE("frozen dynamics gives identity maps") {
  std::vector<Trajectory> trs;
  for (const auto& p : preparation_states(2)) trs.push_back(Trajectory{0.1, {p, p, p}});
  const auto maps = maps_from_trajectories(trs);
  REQUIRE(maps.size() == 2);
  for (const auto& e : maps.maps) CHECK((e - CMatrix::Identity(4, 4)).norm() < 1e-12);
  const auto est = liouvillian_from_first_tensor(tensors_from_maps(maps).tensor(1), 0.1);
  CHECK(est.liouvillian.norm() < 1e-12);
  CHECK(est.hamiltonian.norm() < 1e-12);
}

TEST_CASE("unitary trajectories give a trace- and Hermiticity-preserving channel") {
  const CMatrix h = 0.5 * testing::pauli_z() + 0.3 * testing::pauli_x();
  const auto maps = maps_from_trajectories(unitary_trajectories(h, 0.1, 5));
  CMatrix rho(2, 2);
  rho << 0.6, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.4;
  for (const auto& e : maps.maps) {
    const CMatrix out = unvectorize(e * vectorize(rho));
    CHECK(std::abs(out.trace() - 1.0) < 1e-12);
    CHECK((out - out.adjoint()).norm() < 1e-12);
  }
}

TEST_CASE("maps reproduce the dense semigroup") {
  const auto gen = qubit_lindblad(0.2, 0.0);
  const auto trs = oracle::semigroup_trajectories(gen, 0.1, 10, preparation_states(2));
  const auto maps = maps_from_trajectories(trs);
  for (std::size_t k = 1; k <= 10; ++k)
    CHECK((maps.map(k) - oracle::semigroup_map(gen, 0.1 * static_cast<double>(k))).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("maps do not depend on the preparation basis") {
  const auto gen = qubit_lindblad(0.1, 0.3);
  std::vector<CMatrix> other;
  for (int i = 0; i < 4; ++i) {
    CMatrix g = CMatrix::Random(2, 2);
    CMatrix p = g * g.adjoint();
    other.push_back(p / p.trace());
  }
  const auto a = maps_from_trajectories(oracle::semigroup_trajectories(gen, 0.1, 6, preparation_states(2)));
  const auto b = maps_from_trajectories(oracle::semigroup_trajectories(gen, 0.1, 6, other));
  for (std::size_t k = 1; k <= 6; ++k) CHECK((a.map(k) - b.map(k)).norm() < 1e-10);
}

TEST_CASE("degenerate preparation sets are rejected") {
  const CMatrix p = preparation_states(2)[0];
  std::vector<Trajectory> trs(4, Trajectory{0.1, {p, p}});
  CHECK_THROWS_AS(maps_from_trajectories(trs), IllPosedBasisError);
  auto good = unitary_trajectories(testing::pauli_z(), 0.1, 3);
  good[1].states.pop_back();
  CHECK_THROWS_AS(maps_from_trajectories(good), ValidationError);
}

TEST_CASE("semigroup inputs give a single nonzero tensor") {
  const auto gen = qubit_lindblad(0.2, 0.1);
  const auto maps = maps_from_trajectories(oracle::semigroup_trajectories(gen, 0.1, 20, preparation_states(2)));
  auto t = tensors_from_maps(maps);
  CHECK((t.tensor(1) - maps.map(1)).norm() == 0.0);
  for (std::size_t n = 2; n <= t.size(); ++n) CHECK(t.norms[n - 1] < 1e-12);
  for (double thr : {1e-10, 1e-7, 1e-3}) CHECK(select_cutoff(t, thr).cutoff == 1);

  CMatrix rho(2, 2);
  rho << 0.3, 0.1, 0.1, 0.7;
  const auto p = propagate(t, 1, {rho}, 30);
  CVector v = vectorize(rho);
  for (std::size_t n = 0; n <= 30; ++n) {
    CHECK((p.states[n] - unvectorize(v)).norm() < 1e-12);
    v = t.tensor(1) * v;
  }
  const auto kernel = memory_kernel(t);
  for (double nrm : kernel.norms) CHECK(nrm < 1e-12 / (0.1 * 0.1));
}

TEST_CASE("tensors reconstruct an arbitrary map sequence") {
  DynamicalMapSet maps;
  maps.dt = 0.2;
  maps.system_dim = 2;
  for (int k = 0; k < 12; ++k) maps.maps.push_back(CMatrix::Identity(4, 4) + 0.3 * CMatrix::Random(4, 4));
  const auto t = tensors_from_maps(maps);
  for (std::size_t n = 1; n <= maps.size(); ++n) {
    CMatrix e = t.tensor(n);
    for (std::size_t m = 1; m < n; ++m) e += t.tensor(n - m) * maps.map(m);
    CHECK((e - maps.map(n)).norm() < 1e-12 * std::max(1.0, maps.map(n).norm()));
  }
}

TEST_CASE("full memory reproduces the training trajectory") {
  const auto gen = qubit_lindblad(0.05, 0.2);
  const auto trs = oracle::semigroup_trajectories(gen, 0.1, 15, preparation_states(2));
  std::vector<Trajectory> perturbed = trs;
  // Non-Markovian-looking input: the identity must hold for any maps.
  for (auto& tr : perturbed)
    for (std::size_t k = 1; k < tr.states.size(); ++k)
      tr.states[k] = tr.states[k] * (1.0 - 0.01 * std::sin(static_cast<double>(k)));
  const auto maps = maps_from_trajectories(perturbed);
  const auto t = tensors_from_maps(maps);
  for (const auto& tr : perturbed) {
    testing::WarningCapture quiet;
    const auto p = propagate(t, t.size(), {tr.states[0]}, 15);
    for (std::size_t k = 0; k <= 15; ++k) CHECK((p.states[k] - tr.states[k]).norm() < 1e-12);
  }
}

TEST_CASE("long Lindblad propagation stays on the exact solution") {
  const auto gen = qubit_lindblad(0.05, 0.02);
  const auto maps = maps_from_trajectories(oracle::semigroup_trajectories(gen, 0.05, 50, preparation_states(2)));
  auto t = tensors_from_maps(maps);
  apply_cutoff(t);
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  const auto p = propagate(t, t.cutoff, {rho}, 5000);
  const auto ref = oracle::semigroup_trajectories(gen, 0.05, 5000, {rho})[0];
  double worst = 0.0;
  for (std::size_t k = 0; k <= 5000; ++k) worst = std::max(worst, trace_distance(p.states[k], ref.states[k]));
  CHECK(worst < 1e-8);
}

TEST_CASE("cutoff for geometric decay") {
  std::vector<double> norms;
  for (int k = 1; k <= 30; ++k) norms.push_back(std::pow(0.5, k));
  const auto sel = select_cutoff(synthetic_set(norms), 1e-3);
  CHECK(sel.decayed);
  CHECK(sel.cutoff == static_cast<std::size_t>(std::ceil(std::log(1e-3) / std::log(0.5))));

  auto slow = synthetic_set({1.0, 0.9, 0.8, 0.7});
  testing::WarningCapture w;
  apply_cutoff(slow, 1e-7);
  CHECK_FALSE(slow.decayed);
  CHECK(slow.cutoff == 4);
  CHECK(w.contains("not decayed"));
}

TEST_CASE("propagation guards") {
  auto t = synthetic_set({2.2});
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  {
    testing::WarningCapture w;
    propagate(t, 1, {rho}, 3);
    CHECK(w.contains("unstable"));
  }
  t.tensors[0](0, 0) = NAN;
  CHECK_THROWS_AS(propagate(t, 1, {rho}, 3), NumericalError);
  CHECK_THROWS_AS(propagate(t, 1, {}, 3), ValidationError);
}

TEST_CASE("Hamiltonian recovery from unitary dynamics converges with dt") {
  const CMatrix h = 0.5 * testing::pauli_z() + 0.3 * testing::pauli_x();
  std::vector<double> errors;
  for (double dt : {0.1, 0.05, 0.025}) {
    const auto t = tensors_from_maps(maps_from_trajectories(unitary_trajectories(h, dt, 1)));
    const auto est = liouvillian_from_first_tensor(t.tensor(1), dt);
    CHECK((est.hamiltonian - est.hamiltonian.adjoint()).norm() < 1e-14);
    CHECK(std::abs(est.hamiltonian.trace()) < 1e-14);
    errors.push_back((est.hamiltonian - h).norm());
  }
  CHECK(errors[0] / errors[1] >= 2.0);
  CHECK(errors[1] / errors[2] >= 2.0);
  CHECK(errors[2] < 1e-3);
}

TEST_CASE("dissipative first tensor is flagged") {
  const auto gen = qubit_lindblad(2.0, 2.0);
  const auto maps = maps_from_trajectories(oracle::semigroup_trajectories(gen, 0.1, 1, preparation_states(2)));
  testing::WarningCapture w;
  const auto est = liouvillian_from_first_tensor(tensors_from_maps(maps).tensor(1), 0.1);
  CHECK(est.flagged);
  CHECK(est.residual > 0.1);
}

TEST_CASE("Gell-Mann basis is orthonormal and traceless") {
  for (std::size_t d : {2, 3}) {
    const auto g = gell_mann_basis(d);
    REQUIRE(g.size() == d * d - 1);
    for (std::size_t a = 0; a < g.size(); ++a) {
      CHECK(std::abs(g[a].trace()) < 1e-14);
      CHECK((g[a] - g[a].adjoint()).norm() < 1e-14);
      for (std::size_t b = 0; b < g.size(); ++b)
        CHECK(std::abs((g[a] * g[b]).trace() - (a == b ? 1.0 : 0.0)) < 1e-14);
    }
  }
}

TEST_CASE("memory kernel samples are resolution independent for a smooth kernel") {
  auto kernel_at = [](double t) { return CMatrix(CMatrix::Identity(4, 4) * std::exp(-t) * std::cos(2.0 * t)); };
  auto build = [&](double dt, std::size_t m) {
    TransferTensorSet t;
    t.dt = dt;
    t.system_dim = 2;
    for (std::size_t k = 1; k <= m; ++k) {
      t.tensors.push_back(dt * dt * kernel_at(dt * static_cast<double>(k)));
      t.norms.push_back(t.tensors.back().norm());
    }
    t.cutoff = m;
    return t;
  };
  const auto coarse = build(0.1, 20), fine = build(0.05, 40);
  const auto kc = memory_kernel(coarse), kf = memory_kernel(fine);
  for (std::size_t k = 2; k <= 20; ++k) {
    CHECK((kc.kernel(k) - kf.kernel(2 * k)).norm() < 1e-12);
    CHECK(fine.norms[2 * k - 1] / coarse.norms[k - 1] == doctest::Approx(0.25).epsilon(1e-12));
  }
}
