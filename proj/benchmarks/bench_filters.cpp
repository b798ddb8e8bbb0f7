#include <benchmark/benchmark.h>

#include "mlkbf/harness.hpp"
#include "mlkbf/kalman_ref.hpp"
#include "mlkbf/ml_nc.hpp"

using namespace mlkbf;

namespace {

void BM_philox_normals(benchmark::State& state) {
  RandomStream stream(1, {Purpose::Generic, 0, 0, 0});
  std::vector<double> buf(size_t(state.range(0)));
  std::uint64_t offset = 0;
  for (auto _ : state) {
    stream.fill_normals(offset, buf);
    benchmark::DoNotOptimize(buf.data());
    offset += buf.size();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_philox_normals)->Arg(1024)->Arg(65536);

void BM_enkbf_step(benchmark::State& state) {
  const int N = int(state.range(0));
  const ModelSpec model = make_ou5_model(7);
  Ensemble ens{5, sample_initial_ensemble(model, N, 5, {7, 0})};
  StepNoise noise;
  noise.dW.resize(model.dx, N);
  noise.dV.resize(model.dy, N);
  StreamNoise src(7, 5, 0);
  src.fill(0, &noise.dW, &noise.dV);
  const Vector dY = Vector::Constant(model.dy, 0.01);
  for (auto _ : state) {
    Ensemble out = enkbf_step(ens, dY, model, VariantId::Vanilla, noise);
    benchmark::DoNotOptimize(out.particles.data());
  }
  state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_enkbf_step)->Arg(64)->Arg(512)->Arg(4096);

void BM_enkbf_run_level(benchmark::State& state) {
  const int l = int(state.range(0));
  const ModelSpec model = make_ou5_model(7);
  auto [sig, obs] = simulate_truth_and_obs(model, 9, 1, 7);
  (void)sig;
  for (auto _ : state) {
    const EnkbfRunResult r = enkbf_run(model, obs, l, 128, VariantId::Vanilla, {7, 0});
    benchmark::DoNotOptimize(r.log_nc.u);
  }
  state.SetItemsProcessed(state.iterations() * 128 * (std::int64_t(1) << l));
}
BENCHMARK(BM_enkbf_run_level)->Arg(5)->Arg(7);

void BM_coupled_run(benchmark::State& state) {
  const ModelSpec model = make_ou5_model(7);
  auto [sig, obs] = simulate_truth_and_obs(model, 9, 1, 7);
  (void)sig;
  for (auto _ : state) {
    const CoupledRunOutput c = coupled_run(model, obs, 6, 128, VariantId::Vanilla, {7, 0});
    benchmark::DoNotOptimize(c.u_fine);
  }
}
BENCHMARK(BM_coupled_run);

void BM_kbf_run(benchmark::State& state) {
  const ModelSpec model = make_ou5_model(7);
  auto [sig, obs] = simulate_truth_and_obs(model, 9, 1, 7);
  (void)sig;
  for (auto _ : state) {
    const KbfRunResult r = kbf_run(model, obs, 8);
    benchmark::DoNotOptimize(r.means.data());
  }
}
BENCHMARK(BM_kbf_run);

}  // namespace

BENCHMARK_MAIN();
