#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lorasim {

// Roofline parameters for one accelerator plus the transformer geometry the
// simulator charges against. Latencies are seconds, sizes bytes, rates per
// second. proj_coeff is the effective seconds-per-FLOP for large dense
// projections (1 / (efficiency * peak_flops)); attn_coeff is seconds per
// attended token position per layer, calibrated jointly against the decode
// anchor bands and the batch-32 per-token latency penalty (<= 3ms).
struct CostParams {
  double peak_flops = 312e12;
  double mem_bw = 2.0e12;
  double kernel_overhead = 38e-6;
  double pcie_bw = 32e9;
  int elem_bytes = 2;
  int layers = 32;
  int hidden_dim = 4096;
  int lora_rank = 16;
  int projections_per_layer = 7;
  double attn_coeff = 9e-9;
  double proj_coeff = 1.0 / (0.5 * 312e12);
};

// Shape of one segmented batched LoRA operator invocation:
// n adapters over s_n token rows, mapping h_in -> h_out.
struct SgmvShape {
  std::int64_t num_models = 0;  // n
  std::int64_t total_rows = 0;  // s_n
  std::int64_t h_in = 0;
  std::int64_t h_out = 0;
};

// One request's contribution to a decode step. For decode rows, seq_len is the
// context length attended by the new token. For prefill rows, prompt_len drives
// both the row count and the causal attention cost.
struct StepInput {
  int seq_len = 0;
  bool is_prefill = false;
  int prompt_len = 0;
};

// Floating-point operations for one invocation: s_n * h_in * h_out * 2
// (the 2 covers the multiply-accumulate pair).
double sgmv_flop(const SgmvShape& shape);

// Bytes moved: rows in and out once each, plus each adapter's weights once:
// (s_n * (h_in + h_out) + n * h_in * h_out) * elem_bytes.
double sgmv_io_bytes(const SgmvShape& shape, int elem_bytes = 2);

// FLOP per byte. Degenerate zero-I/O shapes are an error.
double arithmetic_intensity(const SgmvShape& shape, int elem_bytes = 2);

// Roofline latency with a fixed launch floor:
// max(flop / peak_flops, io / mem_bw, kernel_overhead).
double sgmv_latency(const SgmvShape& shape, const CostParams& params);

// Extra elements a gather + batched-matmul formulation must materialize
// compared with segmented access: per-row copies of A and B, s_n * h_in * h_out * 2.
double gather_bmm_extra_elements(const SgmvShape& shape);
double gather_bmm_extra_io_bytes(const SgmvShape& shape, int elem_bytes = 2);

// Latency of one full decode step across all layers: dense projections,
// attention, and the per-pair shrink+expand adapter work. Adapter count is
// bounded by the request count; the bound is what gets charged since the
// adapter term is launch-overhead dominated at these sizes.
double decode_step_latency(std::span<const StepInput> batch, const CostParams& params);

// Host-to-device transfer time for an adapter's weights over layers_loaded
// layers. Zero layers means the adapter is resident already.
double adapter_load_latency(int layers_loaded, const CostParams& params);

// Adapter weight bytes for a single layer: projections * (A + B) * elem_bytes.
double adapter_bytes_per_layer(const CostParams& params);

}  // namespace lorasim
