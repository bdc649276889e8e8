#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "lorasim/cost_model.hpp"
#include "lorasim/kv_cache.hpp"
#include "lorasim/workload.hpp"

namespace lorasim {

// Thrown for malformed or invalid configuration; the message carries the
// dotted key path, and for syntax errors the line and column.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct CostModelConfig {
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
  double flops_efficiency = 0.5;  // projections run at efficiency * peak_flops

  CostParams params() const;
};

struct KvCacheSection {
  int page_size = 16;
  int kv_heads = 32;
  int head_dim = 128;
  int total_pages = 0;  // 0: derived from cluster memory minus weights and reserve
};

struct SchedulerSection {
  int max_batch = 32;
  int lightly_loaded_threshold = 16;
  int headroom_tokens = 0;  // 0: derived from the mean output length
};

struct ClusterSection {
  int gpu_count = 1;
  double gpu_memory_gb = 80.0;
  double reserved_memory_gb = 2.0;
};

struct WorkloadSection {
  int num_requests = 1000;
  ArrivalSpec arrival{ArrivalKind::Burst, 1.0, 1.0, 0.0, 0.0, 0.0};
  Popularity popularity = Popularity::Distinct;
  double alpha = 1.5;
  std::string length_table = "builtin";  // "builtin" or a CSV path
  std::uint64_t seed = 42;
};

struct OutputSection {
  std::string dir = "out";
  std::string steps_csv = "steps.csv";
  std::string summary_json = "summary.json";
};

struct ExperimentConfig {
  CostModelConfig cost_model;
  KvCacheSection kv_cache;
  SchedulerSection scheduler;
  ClusterSection cluster;
  WorkloadSection workload;
  OutputSection output;

  // Directory that relative workload.length_table paths resolve against;
  // set by the parser to the config file's directory. Not serialized.
  std::string base_dir;

  // Derived views used by the simulator.
  CostParams cost_params() const { return cost_model.params(); }
  KvPageConfig kv_page_config() const;  // total_pages resolved
  int headroom_pages() const;
  WorkloadSpec workload_spec() const;  // length table resolved

  // Resolved length table ("builtin" or loaded from length_table path).
  std::vector<LengthRow> length_rows() const;

  void validate() const;  // throws ConfigError listing every violation

  std::string to_json_text() const;  // canonical form, round-trips via parse
};

// Parse over defaults: absent keys keep default values, unknown keys are
// errors. base_dir anchors relative length_table paths.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name,
                                   const std::string& base_dir);

ExperimentConfig load_config_file(const std::string& path);

}  // namespace lorasim
