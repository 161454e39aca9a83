#include <benchmark/benchmark.h>

#include <random>

#include "hbest/evaluate.hpp"
#include "hbest/model.hpp"
#include "hbest/sampler.hpp"
#include "hbest/simulate.hpp"
#include "hbest/spectral.hpp"

using namespace hbest;

namespace {

TimeSeries white_noise(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> norm;
  TimeSeries ts;
  ts.label = "bench";
  ts.values.resize(n);
  for (int t = 0; t < n; ++t) ts.values[t] = norm(gen);
  return ts;
}

Dataset bench_dataset(int L, int n, int B) {
  std::vector<TimeSeries> series;
  for (int ell = 0; ell < L; ++ell) series.push_back(white_noise(n, 100 + ell));
  return make_dataset(series, B);
}

ParameterState bench_state(int B, int L, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> norm(0.0, 0.3);
  ParameterState st = ParameterState::zeros(B, L);
  st.zeta.assign(L, 2.0);
  for (int b = 0; b <= B; ++b) st.beta_glob[b] = norm(gen);
  for (auto& bl : st.beta_loc)
    for (int b = 0; b <= B; ++b) bl[b] = norm(gen);
  return st;
}

}  // namespace

static void BM_Periodogram(benchmark::State& state) {
  const TimeSeries ts = white_noise(int(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(periodogram(ts));
}
BENCHMARK(BM_Periodogram)->Arg(500)->Arg(1000)->Arg(4096);

static void BM_BasisMatrix(benchmark::State& state) {
  const Vec freqs = fundamental_frequencies(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(basis_matrix(freqs, 15));
}
BENCHMARK(BM_BasisMatrix)->Arg(500)->Arg(1000);

static void BM_WhittleLoglik(benchmark::State& state) {
  const int L = int(state.range(0));
  const Dataset data = bench_dataset(L, 500, 15);
  const ParameterState st = bench_state(15, L, 7);
  for (auto _ : state) benchmark::DoNotOptimize(whittle_loglik(st, data));
}
BENCHMARK(BM_WhittleLoglik)->Arg(1)->Arg(5)->Arg(15);

static void BM_LocalGradHess(benchmark::State& state) {
  const Dataset data = bench_dataset(1, int(state.range(0)), 15);
  const ParameterState st = bench_state(15, 1, 8);
  Hyperparameters hp;
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_local(st.beta_loc[0], 0, st, data, hp));
    benchmark::DoNotOptimize(hess_local(st.beta_loc[0], 0, st, data, hp));
  }
}
BENCHMARK(BM_LocalGradHess)->Arg(500)->Arg(1000)->Arg(2000);

static void BM_MapOptimizeLocal(benchmark::State& state) {
  const Dataset data = bench_dataset(1, 500, 15);
  const ParameterState st = bench_state(15, 1, 9);
  Hyperparameters hp;
  const auto f = [&](const Vec& b) { return cond_logpost_local(b, 0, st, data, hp); };
  const auto g = [&](const Vec& b) { return grad_local(b, 0, st, data, hp); };
  const auto h = [&](const Vec& b) { return hess_local(b, 0, st, data, hp); };
  for (auto _ : state) benchmark::DoNotOptimize(map_optimize(f, g, h, st.beta_loc[0]));
}
BENCHMARK(BM_MapOptimizeLocal);

static void BM_GriddyTau(benchmark::State& state) {
  Hyperparameters hp;
  const Grid grid = Grid::student_t(hp.nu_tau, hp.tau_min, hp.tau_max, int(state.range(0)));
  const ParameterState st = bench_state(15, 5, 10);
  RngStream rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(griddy_gibbs_tau(st, hp, grid, rng));
}
BENCHMARK(BM_GriddyTau)->Arg(100)->Arg(500);

static void BM_ChainSweeps(benchmark::State& state) {
  const int L = int(state.range(0));
  const Dataset data = bench_dataset(L, 500, 15);
  SamplerConfig cfg;
  cfg.iterations = 11;
  cfg.burn_in = 1;
  cfg.seed = 2;
  for (auto _ : state) benchmark::DoNotOptimize(run_chain(data, cfg));  // 10 sweeps
}
BENCHMARK(BM_ChainSweeps)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_HierAutocovariance(benchmark::State& state) {
  const ParameterState st = bench_state(15, 1, 11);
  for (auto _ : state) benchmark::DoNotOptimize(hier_autocovariance(st.beta_glob, 1000));
}
BENCHMARK(BM_HierAutocovariance);

static void BM_Ess(benchmark::State& state) {
  std::mt19937 gen(12);
  std::normal_distribution<double> norm;
  Vec x(int(state.range(0)));
  double prev = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    prev = 0.6 * prev + norm(gen);
    x[i] = prev;
  }
  for (auto _ : state) benchmark::DoNotOptimize(ess(x));
}
BENCHMARK(BM_Ess)->Arg(4500)->Arg(100000);

BENCHMARK_MAIN();
