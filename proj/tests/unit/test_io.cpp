#include <filesystem>
#include <fstream>
#include <sstream>

#include "chaintensor/io.hpp"
#include "doctest.h"

using namespace chaintensor;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "chaintensor_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("trajectory CSV round trip is exact") {
  Trajectory tr;
  tr.dt = 0.1;
  for (int k = 0; k < 5; ++k) {
    CMatrix r(2, 2);
    r << 0.3 + 0.01 * k, Complex(1.0 / 3.0, -0.1 * k), Complex(1.0 / 3.0, 0.1 * k), 0.7 - 0.01 * k;
    tr.states.push_back(r);
  }
  const auto path = scratch("traj.csv").string();
  io::write_trajectory_csv(path, tr);
  const std::string text = slurp(path);
  CHECK(text.rfind("# units:", 0) == 0);
  CHECK(text.find("t,re_rho_00,im_rho_00") != std::string::npos);
  const Trajectory back = io::read_trajectory_csv(path);
  REQUIRE(back.states.size() == tr.states.size());
  CHECK(back.dt == doctest::Approx(0.1).epsilon(1e-15));
  for (std::size_t k = 0; k < tr.states.size(); ++k) CHECK((back.states[k] - tr.states[k]).norm() == 0.0);
}

TEST_CASE("tensor container round trip is exact") {
  TransferTensorSet t;
  t.dt = 0.05;
  t.system_dim = 3;
  for (int k = 0; k < 4; ++k) {
    t.tensors.push_back(CMatrix::Random(9, 9));
    t.norms.push_back(t.tensors.back().norm());
  }
  t.cutoff = 3;
  t.decayed = false;
  const auto path = scratch("t.ttm").string();
  io::write_tensor_container(path, t);
  const auto back = io::read_tensor_container(path);
  CHECK(back.dt == t.dt);
  CHECK(back.system_dim == 3);
  CHECK(back.cutoff == 3);
  CHECK_FALSE(back.decayed);
  REQUIRE(back.size() == 4);
  for (std::size_t k = 1; k <= 4; ++k) CHECK((back.tensor(k) - t.tensor(k)).norm() == 0.0);
  CHECK(back.norms == t.norms);
}

TEST_CASE("corrupt containers are rejected") {
  const auto path = scratch("bad.ttm").string();
  std::ofstream(path) << "NOTATENSORFILE";
  CHECK_THROWS_AS(io::read_tensor_container(path), ValidationError);
  CHECK_THROWS_AS(io::read_tensor_container(scratch("missing.ttm").string()), Error);
}

TEST_CASE("malformed trajectory files are rejected") {
  const auto path = scratch("bad.csv").string();
  std::ofstream(path) << "# units: x\nt,a,b\n0,1,2\n0.1,1\n";
  CHECK_THROWS_AS(io::read_trajectory_csv(path), ValidationError);
}

TEST_CASE("coefficient CSV lists eta with the system coupling first") {
  ChainCoefficients c{{0.5, 0.5, 0.5}, {1.0, 1.0 / 12.0, 1.0 / 15.0}};
  const auto path = scratch("coef.csv").string();
  io::write_coefficients_csv(path, c, chain_hamiltonian(c));
  const std::string text = slurp(path);
  CHECK(text.find("n,alpha,beta,omega,eta") != std::string::npos);
  CHECK(text.find("\n0,0.5,1,0.5,1\n") != std::string::npos);
}
