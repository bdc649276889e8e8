#include "lorasim/cost_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace lorasim {

double sgmv_flop(const SgmvShape& shape) {
  return 2.0 * static_cast<double>(shape.total_rows) * static_cast<double>(shape.h_in) *
         static_cast<double>(shape.h_out);
}

double sgmv_io_bytes(const SgmvShape& shape, int elem_bytes) {
  const double rows = static_cast<double>(shape.total_rows);
  const double weights = static_cast<double>(shape.num_models) *
                         static_cast<double>(shape.h_in) * static_cast<double>(shape.h_out);
  return (rows * (static_cast<double>(shape.h_in) + static_cast<double>(shape.h_out)) + weights) *
         static_cast<double>(elem_bytes);
}

double arithmetic_intensity(const SgmvShape& shape, int elem_bytes) {
  const double io = sgmv_io_bytes(shape, elem_bytes);
  if (io <= 0.0) throw std::invalid_argument("arithmetic_intensity: zero-I/O shape");
  return sgmv_flop(shape) / io;
}

double sgmv_latency(const SgmvShape& shape, const CostParams& params) {
  const double compute = sgmv_flop(shape) / params.peak_flops;
  const double memory = sgmv_io_bytes(shape, params.elem_bytes) / params.mem_bw;
  return std::max({compute, memory, params.kernel_overhead});
}

double gather_bmm_extra_elements(const SgmvShape& shape) {
  return 2.0 * static_cast<double>(shape.total_rows) * static_cast<double>(shape.h_in) *
         static_cast<double>(shape.h_out);
}

double gather_bmm_extra_io_bytes(const SgmvShape& shape, int elem_bytes) {
  return gather_bmm_extra_elements(shape) * static_cast<double>(elem_bytes);
}

namespace {

// One dense h x h projection over `rows` token rows: compute-latency vs the
// cost of streaming activations and the weight matrix once.
double projection_latency(double rows, const CostParams& params) {
  const double h = static_cast<double>(params.hidden_dim);
  const double compute = 2.0 * rows * h * h * params.proj_coeff;
  const double memory = (rows * 2.0 * h + h * h) * params.elem_bytes / params.mem_bw;
  return std::max(compute, memory);
}

// Shrink+expand pair for one projection site. The launch floor covers the
// pair, matching operator-level timing of the segmented kernel.
double adapter_pair_latency(double rows, double models, const CostParams& params) {
  const double h = static_cast<double>(params.hidden_dim);
  const double r = static_cast<double>(params.lora_rank);
  const double flop = 4.0 * rows * h * r;
  const double io = 2.0 * (rows * (h + r) + models * h * r) * params.elem_bytes;
  return std::max({flop / params.peak_flops, io / params.mem_bw, params.kernel_overhead});
}

}  // namespace

double decode_step_latency(std::span<const StepInput> batch, const CostParams& params) {
  if (batch.empty()) return 0.0;
  double rows = 0.0;
  double attended = 0.0;
  for (const StepInput& in : batch) {
    if (in.is_prefill) {
      if (in.prompt_len <= 0)
        throw std::invalid_argument("decode_step_latency: prefill with prompt_len < 1");
      const double p = static_cast<double>(in.prompt_len);
      rows += p;
      attended += p * (p + 1.0) / 2.0;  // causal attention over the prompt
    } else {
      if (in.seq_len <= 0)
        throw std::invalid_argument("decode_step_latency: decode with seq_len < 1");
      rows += 1.0;
      attended += static_cast<double>(in.seq_len);
    }
  }
  const double models = static_cast<double>(batch.size());
  const double per_layer =
      static_cast<double>(params.projections_per_layer) *
          (projection_latency(rows, params) + adapter_pair_latency(rows, models, params)) +
      params.attn_coeff * attended;
  return static_cast<double>(params.layers) * per_layer;
}

double adapter_bytes_per_layer(const CostParams& params) {
  return static_cast<double>(params.projections_per_layer) * 2.0 *
         static_cast<double>(params.hidden_dim) * static_cast<double>(params.lora_rank) *
         static_cast<double>(params.elem_bytes);
}

double adapter_load_latency(int layers_loaded, const CostParams& params) {
  if (layers_loaded < 0) throw std::invalid_argument("adapter_load_latency: negative layers");
  return static_cast<double>(layers_loaded) * adapter_bytes_per_layer(params) / params.pcie_bw;
}

}  // namespace lorasim
