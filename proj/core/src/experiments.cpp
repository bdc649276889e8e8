#include "lorasim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "lorasim/sgmv.hpp"

namespace lorasim {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform01() * 2.0 - 1.0;
  return m;
}

Popularity popularity_for_trial(int trial) {
  switch (trial % 4) {
    case 0:
      return Popularity::Distinct;
    case 1:
      return Popularity::Uniform;
    case 2:
      return Popularity::Skewed;
    default:
      return Popularity::Identical;
  }
}

}  // namespace

VerifyReport verify_sgmv(int trials, std::uint64_t seed, bool inject_fault) {
  VerifyReport report;
  report.trials = trials;
  if (trials < 0) throw std::invalid_argument("verify_sgmv: negative trial count");

  static const std::size_t dims[] = {8, 64, 128};
  static const std::size_t ranks[] = {8, 16, 32, 64};

  Rng rng(derive_seed(seed, 17));
  for (int trial = 0; trial < trials; ++trial) {
    const Popularity pop = popularity_for_trial(trial);
    const std::size_t h_in = dims[rng.uniform_index(3)];
    const std::size_t h_out = dims[rng.uniform_index(3)];
    std::vector<std::size_t> fitting;
    for (std::size_t r : ranks)
      if (r <= std::min(h_in, h_out)) fitting.push_back(r);
    const std::size_t rank = fitting[rng.uniform_index(fitting.size())];
    // Distinct trials cap rows at 8 so adapter count stays within 8.
    const std::size_t max_rows = pop == Popularity::Distinct ? 8 : 64;
    const int rows = rng.uniform_int(1, static_cast<int>(max_rows));

    const auto assignment = assign_models(rows, pop, 1.5, rng.next());

    // Group rows by adapter id, ascending; row order inside a group follows
    // original index so the grouping itself is the only permutation.
    std::map<LoraId, std::vector<int>> groups;
    for (int i = 0; i < rows; ++i) groups[assignment[static_cast<std::size_t>(i)]].push_back(i);

    std::vector<std::size_t> boundaries{0};
    std::vector<LoraModel> models;
    Matrix x(static_cast<std::size_t>(rows), h_in);
    std::size_t row_cursor = 0;
    for (const auto& [lora, members] : groups) {
      models.emplace_back(lora, random_matrix(rng, h_in, rank), random_matrix(rng, rank, h_out));
      for (int src : members) {
        for (std::size_t c = 0; c < h_in; ++c)
          x(row_cursor, c) = rng.uniform01() * 2.0 - 1.0;
        (void)src;
        ++row_cursor;
      }
      boundaries.push_back(row_cursor);
    }
    Batch batch(std::move(x), Segments(boundaries), std::move(models));

    Matrix y = lora_addon(batch);
    if (inject_fault && trial == 0 && !y.data().empty()) y.data()[0] += 1e-6;
    const Matrix y_loop = lora_loop_oracle(batch);
    const Matrix y_gather = gather_bmm_oracle(batch);
    const double dev = std::max(max_abs_diff(y, y_loop), max_abs_diff(y, y_gather));

    VerifyCase c;
    c.trial = trial;
    c.popularity = pop;
    c.h_in = h_in;
    c.h_out = h_out;
    c.rank = rank;
    c.rows = static_cast<std::size_t>(rows);
    c.models = batch.models.size();
    c.deviation = dev;
    c.passed = dev < report.tolerance;
    if (dev > report.worst_deviation) report.worst_deviation = dev;
    if (!c.passed) {
      ++report.failures;
      report.failed_cases.push_back(c);
    }
  }
  return report;
}

namespace {

// Expected count of distinct adapters hit by `batch` independent draws over
// m adapters with the given popularity structure.
std::int64_t expected_distinct(Popularity pop, int batch, double alpha) {
  switch (pop) {
    case Popularity::Distinct:
      return batch;
    case Popularity::Identical:
      return 1;
    case Popularity::Uniform: {
      const int m = model_count_for(batch, pop);
      const double p = 1.0 / m;
      const double expect = m * (1.0 - std::pow(1.0 - p, batch));
      return std::clamp<std::int64_t>(std::llround(expect), 1, std::min(batch, m));
    }
    case Popularity::Skewed: {
      const int m = model_count_for(batch, pop);
      double total = 0.0, w = 1.0;
      for (int i = 0; i < m; ++i) {
        total += w;
        w /= alpha;
      }
      double expect = 0.0;
      w = 1.0;
      for (int i = 0; i < m; ++i) {
        expect += 1.0 - std::pow(1.0 - w / total, batch);
        w /= alpha;
      }
      return std::clamp<std::int64_t>(std::llround(expect), 1, std::min(batch, m));
    }
  }
  return 1;
}

}  // namespace

std::vector<RooflineRow> roofline_sweep(const CostParams& params, int max_batch) {
  std::vector<RooflineRow> rows;
  static const Popularity pops[] = {Popularity::Distinct, Popularity::Uniform,
                                    Popularity::Skewed, Popularity::Identical};
  for (Popularity pop : pops) {
    for (int b = 1; b <= max_batch; ++b) {
      SgmvShape shape;
      shape.num_models = expected_distinct(pop, b, 1.5);
      shape.total_rows = b;
      shape.h_in = params.lora_rank;
      shape.h_out = params.hidden_dim;
      RooflineRow row;
      row.batch_size = b;
      row.distribution = pop;
      row.flop = sgmv_flop(shape);
      row.io_bytes = sgmv_io_bytes(shape, params.elem_bytes);
      row.intensity = arithmetic_intensity(shape, params.elem_bytes);
      row.est_latency = sgmv_latency(shape, params);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string roofline_csv(const std::vector<RooflineRow>& rows) {
  std::string out = "batch_size,distribution,flop,io_bytes,intensity,est_latency\n";
  char buf[160];
  for (const RooflineRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.0f,%.0f,%.12g,%.9g\n", r.batch_size,
                  to_string(r.distribution), r.flop, r.io_bytes, r.intensity, r.est_latency);
    out += buf;
  }
  return out;
}

MetricsLog run_simulation(const ExperimentConfig& cfg, BatchMode mode, SimOptions opts) {
  opts.mode = mode;
  Simulator sim(cfg, std::move(opts));
  return sim.run();
}

MetricsLog baseline_mode(const ExperimentConfig& cfg) {
  return run_simulation(cfg, BatchMode::SingleLora);
}

CompareReport compare_modes(const ExperimentConfig& cfg) {
  CompareReport report;
  static const Popularity pops[] = {Popularity::Distinct, Popularity::Uniform,
                                    Popularity::Skewed, Popularity::Identical};
  for (Popularity pop : pops) {
    ExperimentConfig arm = cfg;
    arm.workload.popularity = pop;
    CompareRow row;
    row.distribution = pop;
    row.multi = run_simulation(arm, BatchMode::MultiLora).summarize();
    row.single = run_simulation(arm, BatchMode::SingleLora).summarize();
    row.throughput_ratio = row.single.throughput_tok_s > 0.0
                               ? row.multi.throughput_tok_s / row.single.throughput_tok_s
                               : 0.0;
    row.p50_delta_s = row.multi.p50_token_latency_s - row.single.p50_token_latency_s;
    report.rows.push_back(row);
  }
  return report;
}

std::string compare_csv(const CompareReport& report) {
  std::string out =
      "distribution,punica_tok_s,baseline_tok_s,throughput_ratio,punica_p50_ms,"
      "baseline_p50_ms,p50_delta_ms,punica_batch_p50,baseline_batch_p50,"
      "baseline_batch_le3_share\n";
  char buf[256];
  for (const CompareRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f,%.4f,%.4f,%.4f,%.4f,%d,%d,%.4f\n",
                  to_string(r.distribution), r.multi.throughput_tok_s,
                  r.single.throughput_tok_s, r.throughput_ratio,
                  r.multi.p50_token_latency_s * 1e3, r.single.p50_token_latency_s * 1e3,
                  r.p50_delta_s * 1e3, r.multi.batch_size_p50, r.single.batch_size_p50,
                  r.single.batch_le3_share);
    out += buf;
  }
  return out;
}

std::string compare_table(const CompareReport& report) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %14s %14s %8s %12s %12s %10s\n", "workload",
                "punica tok/s", "base tok/s", "ratio", "punica p50", "base p50", "delta ms");
  out += buf;
  for (const CompareRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-10s %14.1f %14.1f %8.2f %10.3fms %10.3fms %10.3f\n",
                  to_string(r.distribution), r.multi.throughput_tok_s,
                  r.single.throughput_tok_s, r.throughput_ratio,
                  r.multi.p50_token_latency_s * 1e3, r.single.p50_token_latency_s * 1e3,
                  r.p50_delta_s * 1e3);
    out += buf;
  }
  return out;
}

}  // namespace lorasim
