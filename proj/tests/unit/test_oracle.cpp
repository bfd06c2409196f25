#include <cmath>

#include "chaintensor/oracle.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chaintensor;

namespace {

ChainParameters short_chain() {
  ChainParameters c;
  c.system_coupling = 0.3;
  c.frequencies = {0.8, 0.6};
  c.hoppings = {0.12};
  return c;
}

}  // namespace

TEST_CASE("dense integrators agree") {
  const CMatrix h = 0.5 * testing::pauli_z() + 0.3 * testing::pauli_x();
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  const auto sys = oracle::build_dense_chain(h, {oracle::DenseBath{a, short_chain()}}, 3);
  CHECK(sys.system_dim == 2);
  CHECK(sys.environment_dim == 9);
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  const CMatrix full = oracle::product_initial_state(sys, rho, 2.0);
  const auto eig = oracle::dense_evolve(sys, full, 0.05, 40, oracle::Integrator::eigendecomposition);
  const auto pade = oracle::dense_evolve(sys, full, 0.05, 40, oracle::Integrator::scaling_and_squaring);
  for (std::size_t k = 0; k <= 40; ++k) CHECK(trace_distance(eig.states[k], pade.states[k]) < 1e-10);
}

TEST_CASE("decoupled system oscillates at the Rabi frequency") {
  const CMatrix h = 0.5 * testing::pauli_z() + 0.3 * testing::pauli_x();
  const auto sys = oracle::build_dense_chain(h, {oracle::DenseBath{CMatrix::Zero(2, 2), ChainParameters::decoupled(1)}}, 2);
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  const double dt = 0.1;
  const auto tr = oracle::dense_evolve(sys, oracle::product_initial_state(sys, rho, INFINITY), dt, 50);
  const double omega = std::sqrt(1.0 + 0.36);
  for (std::size_t k = 0; k <= 50; ++k) {
    const double t = dt * static_cast<double>(k);
    const double s = std::sin(0.5 * omega * t);
    CHECK(tr.states[k](0, 0).real() == doctest::Approx(1.0 - 0.36 / (omega * omega) * s * s).epsilon(1e-10));
  }
}

TEST_CASE("Gibbs states and occupations") {
  CMatrix h = CMatrix::Zero(3, 3);
  h(1, 1) = 1.0;
  h(2, 2) = 2.0;
  const CMatrix g0 = oracle::gibbs_state(h, INFINITY);
  CHECK(g0(0, 0).real() == doctest::Approx(1.0));
  const CMatrix mixed = oracle::gibbs_state(h, 0.0);
  CHECK(mixed(2, 2).real() == doctest::Approx(1.0 / 3.0));
  const CMatrix g = oracle::gibbs_state(h, 1.0);
  const double z = 1.0 + std::exp(-1.0) + std::exp(-2.0);
  CHECK(g(1, 1).real() == doctest::Approx(std::exp(-1.0) / z));

  ChainParameters one = ChainParameters::decoupled(1);
  one.frequencies = {0.7};
  const auto sys = oracle::build_dense_chain(CMatrix::Zero(2, 2), {oracle::DenseBath{CMatrix::Zero(2, 2), one}}, 4);
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(1, 1) = 1.0;
  const auto occ = oracle::mode_occupations(sys, oracle::product_initial_state(sys, rho, 2.0), 4);
  double num = 0.0, den = 0.0;
  for (int n = 0; n < 4; ++n) {
    num += n * std::exp(-2.0 * 0.7 * n);
    den += std::exp(-2.0 * 0.7 * n);
  }
  REQUIRE(occ.size() == 1);
  CHECK(occ[0] == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("partial trace of a product state") {
  CMatrix a(2, 2);
  a << 0.7, 0.2, 0.2, 0.3;
  CMatrix b = CMatrix::Identity(3, 3) / 3.0;
  CMatrix full(6, 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) full.block(3 * i, 3 * j, 3, 3) = a(i, j) * b;
  CHECK((oracle::partial_trace_environment(full, 2) - a).norm() < 1e-14);
}

TEST_CASE("amplitude damping semigroup decays exponentially") {
  CMatrix lower = CMatrix::Zero(2, 2);
  lower(1, 0) = 1.0;  // |g><e|
  const auto gen = oracle::LindbladGenerator::build(CMatrix::Zero(2, 2), {lower}, {0.4});
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  const auto tr = oracle::semigroup_trajectories(gen, 0.25, 20, {rho});
  for (std::size_t k = 0; k <= 20; ++k)
    CHECK(tr[0].states[k](0, 0).real() == doctest::Approx(std::exp(-0.4 * 0.25 * static_cast<double>(k))).epsilon(1e-12));
}

TEST_CASE("dense chain refuses oversized Hilbert spaces") {
  ChainParameters c = ChainParameters::decoupled(8);
  CHECK_THROWS_AS(oracle::build_dense_chain(CMatrix::Zero(2, 2), {oracle::DenseBath{CMatrix::Zero(2, 2), c}}, 4, 4096),
                  ResourceError);
}
