#include <benchmark/benchmark.h>

#include "chaintensor/models.hpp"
#include "chaintensor/oracle.hpp"

using namespace chaintensor;

namespace {

EvolutionConfig config(std::size_t n, std::size_t chi) {
  EvolutionConfig cfg;
  cfg.chain_length = n;
  cfg.local_dim = 4;
  cfg.system_dim = 2;
  cfg.max_bond = chi;
  cfg.time_step = 0.1;
  return cfg;
}

// One TEBD step on a chain whose bonds have already grown.
void BM_TebdStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto chi = static_cast<std::size_t>(state.range(1));
  const auto chain = map_to_chain(SpectralDensity::power_law_exp(1.8, 3.0, 0.3, 10.0), n);
  const auto model = monomer_model(SpinBosonParams{}, chain);
  const auto cfg = config(n, chi);
  set_warning_sink(nullptr);
  const TebdPropagator prop(model, cfg);
  ChainState s = initial_state(cfg, SpinBosonParams::excited_projector(), model);
  for (int k = 0; k < 30; ++k) prop.step(s);
  for (auto _ : state) {
    ChainState copy = s;
    prop.step(copy);
    benchmark::DoNotOptimize(copy);
  }
}
BENCHMARK(BM_TebdStep)->Args({20, 16})->Args({50, 16})->Args({50, 32})->Unit(benchmark::kMillisecond);

// Propagation with K transfer tensors; cost per step is linear in K.
void BM_TtmPropagate(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  CMatrix lower = CMatrix::Zero(2, 2);
  lower(1, 0) = 1.0;
  const auto gen = oracle::LindbladGenerator::build(SpinBosonParams{}.hamiltonian(), {lower}, {0.05});
  auto trs = oracle::semigroup_trajectories(gen, 0.1, k, preparation_states(2));
  for (auto& tr : trs)
    for (std::size_t j = 1; j < tr.states.size(); ++j) tr.states[j] *= 1.0 + 1e-3 * static_cast<double>(j % 3);
  set_warning_sink(nullptr);
  const auto t = tensors_from_maps(maps_from_trajectories(trs));
  const CMatrix rho0 = SpinBosonParams::excited_projector();
  for (auto _ : state) benchmark::DoNotOptimize(propagate(t, k, {rho0}, 1000));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 1000);
}
BENCHMARK(BM_TtmPropagate)->Arg(10)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
