#include <benchmark/benchmark.h>

#include "topm/evacuation.hpp"
#include "topm/policies.hpp"
#include "topm/problems.hpp"
#include "topm/rates.hpp"

namespace {

using namespace topm;

void BM_PolicyStep(benchmark::State& state) {
  const Policy policy = static_cast<Policy>(state.range(0));
  const auto spec = make_experiment(ExperimentId::E3);
  const auto means = spec.draw_means(1, 0);
  SyntheticSource src(means, spec.noise_sd, 1, 0);
  SequentialRun run(src, policy, spec.m, spec.n0, 1);
  run.initialize();
  for (auto _ : state) {
    benchmark::DoNotOptimize(run.step());
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_RateGeneric(benchmark::State& state) {
  const auto a = RateSpec::normal(1.0, 1.3);
  const auto b = RateSpec::normal(0.0, 0.8);
  double r = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rate_generic(a, b, r, 1.0 - r));
    r = r < 0.7 ? r + 1e-4 : 0.3;
  }
}

void BM_SolveRatios(benchmark::State& state) {
  std::vector<RateSpec> specs{RateSpec::normal(4, 1), RateSpec::normal(3, 2),
                              RateSpec::normal(2, 1), RateSpec::normal(1, 2)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_ratios(specs, 2, 1e-9));
  }
}

void BM_ClearanceDraw(benchmark::State& state) {
  const auto& net = builtin_network();
  const auto plans = enumerate_plans(net);
  std::uint64_t draw = 0;
  for (auto _ : state) {
    rng::Sequence seq(rng::derive_key(3, rng::kTagObservation, draw++));
    benchmark::DoNotOptimize(simulate_clearance(net, plans[68], seq));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_PosteriorUpdate(benchmark::State& state) {
  AlternativeStat s;
  s.add(0.0);
  s.add(1.0);
  double x = 0.25;
  for (auto _ : state) {
    s.add(x);
    benchmark::DoNotOptimize(posterior(s));
    x = -x;
  }
}

}  // namespace

BENCHMARK(BM_PolicyStep)
    ->Arg(static_cast<int>(topm::Policy::Aoam))
    ->Arg(static_cast<int>(topm::Policy::Ocbass))
    ->Arg(static_cast<int>(topm::Policy::Ocbam));
BENCHMARK(BM_RateGeneric);
BENCHMARK(BM_SolveRatios);
BENCHMARK(BM_ClearanceDraw);
BENCHMARK(BM_PosteriorUpdate);

BENCHMARK_MAIN();
