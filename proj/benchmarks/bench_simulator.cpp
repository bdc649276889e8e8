#include <benchmark/benchmark.h>

#include "lorasim/config.hpp"
#include "lorasim/simulator.hpp"

namespace {

using namespace lorasim;

ExperimentConfig bench_config(int requests, Popularity pop, int gpus) {
  ExperimentConfig cfg;
  cfg.cluster.gpu_count = gpus;
  cfg.workload.num_requests = requests;
  cfg.workload.popularity = pop;
  cfg.workload.seed = 99;
  return cfg;
}

void BM_SaturatedSingleGpu(benchmark::State& state) {
  const auto requests = static_cast<int>(state.range(0));
  const ExperimentConfig cfg = bench_config(requests, Popularity::Skewed, 1);
  for (auto _ : state) {
    Simulator sim(cfg);
    MetricsLog log = sim.run();
    benchmark::DoNotOptimize(log.steps.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * requests);
}

void BM_ClusterPoisson(benchmark::State& state) {
  const auto gpus = static_cast<int>(state.range(0));
  ExperimentConfig cfg = bench_config(400, Popularity::Uniform, gpus);
  cfg.workload.arrival.kind = ArrivalKind::Poisson;
  cfg.workload.arrival.rate = 80.0 * gpus;
  for (auto _ : state) {
    Simulator sim(cfg);
    MetricsLog log = sim.run();
    benchmark::DoNotOptimize(log.steps.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 400);
}

void BM_BaselineMode(benchmark::State& state) {
  const ExperimentConfig cfg = bench_config(static_cast<int>(state.range(0)),
                                            Popularity::Distinct, 1);
  SimOptions opts;
  opts.mode = BatchMode::SingleLora;
  for (auto _ : state) {
    Simulator sim(cfg, opts);
    MetricsLog log = sim.run();
    benchmark::DoNotOptimize(log.steps.data());
  }
}

}  // namespace

BENCHMARK(BM_SaturatedSingleGpu)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClusterPoisson)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BaselineMode)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
