#include <benchmark/benchmark.h>

#include <vector>

#include "lorasim/sgmv.hpp"
#include "lorasim/workload.hpp"

namespace {

using namespace lorasim;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r * c; ++i) m.data()[i] = rng.uniform01() * 2.0 - 1.0;
  return m;
}

// Batch of `rows` token rows split over `groups` adapters as evenly as
// possible; the interesting axis is rows-per-adapter.
Batch make_batch(std::size_t rows, std::size_t groups, std::size_t h_in,
                 std::size_t h_out, std::size_t rank) {
  Rng rng(12345);
  std::vector<std::size_t> bounds{0};
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t size = rows / groups + (g < rows % groups ? 1 : 0);
    if (size > 0) bounds.push_back(bounds.back() + size);
  }
  Segments segs(bounds);
  Matrix x = random_matrix(rng, segs.total_rows(), h_in);
  std::vector<LoraModel> models;
  for (std::size_t s = 0; s < segs.count(); ++s)
    models.emplace_back(static_cast<LoraId>(s), random_matrix(rng, h_in, rank),
                        random_matrix(rng, rank, h_out));
  return Batch(std::move(x), std::move(segs), std::move(models));
}

void BM_SegmentedAddon(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto groups = static_cast<std::size_t>(state.range(1));
  const Batch b = make_batch(rows, groups, 128, 1024, 16);
  for (auto _ : state) {
    Matrix y = lora_addon(b);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows));
}

void BM_LoopOracle(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto groups = static_cast<std::size_t>(state.range(1));
  const Batch b = make_batch(rows, groups, 128, 1024, 16);
  for (auto _ : state) {
    Matrix y = lora_loop_oracle(b);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows));
}

void BM_GatherOracle(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto groups = static_cast<std::size_t>(state.range(1));
  const Batch b = make_batch(rows, groups, 128, 1024, 16);
  for (auto _ : state) {
    Matrix y = gather_bmm_oracle(b);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows));
}

void GroupArgs(benchmark::internal::Benchmark* b) {
  for (int rows : {1, 8, 32, 64}) {
    b->Args({rows, 1});        // one shared adapter
    if (rows > 1) b->Args({rows, rows}); // fully distinct
    if (rows >= 8) b->Args({rows, 8});   // mixed
  }
}

}  // namespace

BENCHMARK(BM_SegmentedAddon)->Apply(GroupArgs);
BENCHMARK(BM_LoopOracle)->Apply(GroupArgs);
BENCHMARK(BM_GatherOracle)->Apply(GroupArgs);

BENCHMARK_MAIN();
