#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lorasim/config.hpp"
#include "lorasim/cost_model.hpp"
#include "lorasim/simulator.hpp"
#include "lorasim/workload.hpp"

namespace lorasim {

// One randomized three-way equivalence trial: the segmented kernels against
// the per-segment loop oracle and the gather + batched-matmul oracle.
struct VerifyCase {
  int trial = 0;
  Popularity popularity = Popularity::Distinct;
  std::size_t h_in = 0;
  std::size_t h_out = 0;
  std::size_t rank = 0;
  std::size_t rows = 0;
  std::size_t models = 0;
  double deviation = 0.0;
  bool passed = true;
};

struct VerifyReport {
  int trials = 0;
  int failures = 0;
  double worst_deviation = 0.0;
  double tolerance = 1e-10;
  std::vector<VerifyCase> failed_cases;

  bool passed() const { return failures == 0; }
};

// Randomized shapes (h in {8,64,128}, rank in {8,16,32,64} where it fits,
// up to 64 rows over up to 8 adapters) across all four popularity groupings.
// inject_fault perturbs one output element on the first trial (test hook).
VerifyReport verify_sgmv(int trials, std::uint64_t seed, bool inject_fault = false);

struct RooflineRow {
  int batch_size = 0;
  Popularity distribution = Popularity::Distinct;
  double flop = 0.0;
  double io_bytes = 0.0;
  double intensity = 0.0;
  double est_latency = 0.0;
};

// Kernel shapes for batch sizes 1..max_batch under each popularity grouping,
// with the adapter count set to the expected number of distinct adapters in
// a batch of that size. h_in = lora_rank, h_out = hidden_dim (expand side).
std::vector<RooflineRow> roofline_sweep(const CostParams& params, int max_batch = 64);
std::string roofline_csv(const std::vector<RooflineRow>& rows);

MetricsLog run_simulation(const ExperimentConfig& cfg, BatchMode mode, SimOptions opts = {});

// The comparison arm: identical engine, single-adapter batches.
MetricsLog baseline_mode(const ExperimentConfig& cfg);

struct CompareRow {
  Popularity distribution = Popularity::Distinct;
  Summary multi;   // punica mode
  Summary single;  // baseline mode
  double throughput_ratio = 0.0;
  double p50_delta_s = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
};

// Runs both modes on the identical workload (same seed) for each of the four
// popularity groupings.
CompareReport compare_modes(const ExperimentConfig& cfg);
std::string compare_csv(const CompareReport& report);
std::string compare_table(const CompareReport& report);

}  // namespace lorasim
