#include "lorasim/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lorasim {

namespace {

using nlohmann::json;

std::string json_path_dot(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

// Section reader with strict key checking and typed extraction.
class Section {
 public:
  Section(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) throw ConfigError("'" + scope_ + "' must be an object");
  }

  ~Section() = default;

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw ConfigError("unknown key '" + json_path_dot(scope_, it.key()) + "'");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) { return j_.at(key); }

  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
  }

  void read(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) type_error(key, "an integer");
    out = v.get<int>();
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer()) type_error(key, "an integer");
    out = v.get<std::uint64_t>();
  }

  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
  }

  [[noreturn]] void type_error(const std::string& key, const std::string& want) {
    throw ConfigError("'" + json_path_dot(scope_, key) + "' must be " + want);
  }

  const std::string& scope() const { return scope_; }

 private:
  const json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

void apply_cost_model(const json& j, CostModelConfig& c) {
  Section s(j, "cost_model");
  s.read("peak_flops", c.peak_flops);
  s.read("mem_bw", c.mem_bw);
  s.read("kernel_overhead", c.kernel_overhead);
  s.read("pcie_bw", c.pcie_bw);
  s.read("elem_bytes", c.elem_bytes);
  s.read("layers", c.layers);
  s.read("hidden_dim", c.hidden_dim);
  s.read("lora_rank", c.lora_rank);
  s.read("projections_per_layer", c.projections_per_layer);
  s.read("attn_coeff", c.attn_coeff);
  s.read("flops_efficiency", c.flops_efficiency);
  s.finish();
}

void apply_kv_cache(const json& j, KvCacheSection& c) {
  Section s(j, "kvcache");
  s.read("page_size", c.page_size);
  s.read("kv_heads", c.kv_heads);
  s.read("head_dim", c.head_dim);
  s.read("total_pages", c.total_pages);
  s.finish();
}

void apply_scheduler(const json& j, SchedulerSection& c) {
  Section s(j, "scheduler");
  s.read("max_batch", c.max_batch);
  s.read("lightly_loaded_threshold", c.lightly_loaded_threshold);
  s.read("headroom_tokens", c.headroom_tokens);
  s.finish();
}

void apply_cluster(const json& j, ClusterSection& c) {
  Section s(j, "cluster");
  s.read("gpu_count", c.gpu_count);
  s.read("gpu_memory", c.gpu_memory_gb);
  s.read("reserved_memory", c.reserved_memory_gb);
  s.finish();
}

void apply_arrival(const json& j, ArrivalSpec& a) {
  Section s(j, "workload.arrival");
  std::string kind;
  s.read("kind", kind);
  if (!kind.empty()) {
    if (kind == "poisson")
      a.kind = ArrivalKind::Poisson;
    else if (kind == "burst")
      a.kind = ArrivalKind::Burst;
    else if (kind == "ramp")
      a.kind = ArrivalKind::Ramp;
    else
      throw ConfigError("'workload.arrival.kind' must be poisson, burst, or ramp");
  }
  s.read("rate", a.rate);
  s.read("peak_rate", a.peak_rate);
  s.read("ramp_up_s", a.ramp_up_s);
  s.read("hold_s", a.hold_s);
  s.read("ramp_down_s", a.ramp_down_s);
  s.finish();
}

void apply_workload(const json& j, WorkloadSection& c) {
  Section s(j, "workload");
  s.read("num_requests", c.num_requests);
  if (s.has("arrival")) apply_arrival(s.raw("arrival"), c.arrival);
  if (s.has("popularity")) {
    const json& v = s.raw("popularity");
    if (!v.is_string()) s.type_error("popularity", "a string");
    const std::string p = v.get<std::string>();
    if (p == "distinct")
      c.popularity = Popularity::Distinct;
    else if (p == "uniform")
      c.popularity = Popularity::Uniform;
    else if (p == "skewed")
      c.popularity = Popularity::Skewed;
    else if (p == "identical")
      c.popularity = Popularity::Identical;
    else
      throw ConfigError("'workload.popularity' must be distinct, uniform, skewed, or identical");
  }
  s.read("alpha", c.alpha);
  s.read("length_table", c.length_table);
  s.read("seed", c.seed);
  s.finish();
}

void apply_output(const json& j, OutputSection& c) {
  Section s(j, "output");
  s.read("dir", c.dir);
  s.read("steps_csv", c.steps_csv);
  s.read("summary_json", c.summary_json);
  s.finish();
}

std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

CostParams CostModelConfig::params() const {
  CostParams p;
  p.peak_flops = peak_flops;
  p.mem_bw = mem_bw;
  p.kernel_overhead = kernel_overhead;
  p.pcie_bw = pcie_bw;
  p.elem_bytes = elem_bytes;
  p.layers = layers;
  p.hidden_dim = hidden_dim;
  p.lora_rank = lora_rank;
  p.projections_per_layer = projections_per_layer;
  p.attn_coeff = attn_coeff;
  p.proj_coeff = 1.0 / (flops_efficiency * peak_flops);
  return p;
}

KvPageConfig ExperimentConfig::kv_page_config() const {
  KvPageConfig kv;
  kv.page_size = kv_cache.page_size;
  kv.layers = cost_model.layers;
  kv.kv_heads = kv_cache.kv_heads;
  kv.head_dim = kv_cache.head_dim;
  kv.elem_bytes = cost_model.elem_bytes;
  if (kv_cache.total_pages > 0) {
    kv.total_pages = kv_cache.total_pages;
  } else {
    const double weights = static_cast<double>(cost_model.layers) *
                           cost_model.projections_per_layer *
                           static_cast<double>(cost_model.hidden_dim) * cost_model.hidden_dim *
                           cost_model.elem_bytes;
    const double avail =
        cluster.gpu_memory_gb * 1e9 - weights - cluster.reserved_memory_gb * 1e9;
    const double per_page = static_cast<double>(kv.bytes_per_page());
    kv.total_pages = avail > 0 ? static_cast<int>(avail / per_page) : 0;
  }
  return kv;
}

int ExperimentConfig::headroom_pages() const {
  int tokens = scheduler.headroom_tokens;
  if (tokens <= 0) {
    const auto rows = length_rows();
    double total_w = 0.0, total_out = 0.0;
    for (const auto& r : rows) {
      total_w += r.weight;
      total_out += r.weight * r.output_len;
    }
    tokens = static_cast<int>(std::ceil(total_out / total_w));
  }
  // At least one page of headroom: admission that leaves zero slack can
  // bounce a request between eviction and exact-fit readmission forever.
  return std::max(1, KvCacheAllocator::pages_for(tokens, kv_cache.page_size));
}

std::vector<LengthRow> ExperimentConfig::length_rows() const {
  if (workload.length_table == "builtin") return builtin_length_table();
  std::filesystem::path p(workload.length_table);
  if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
  std::ifstream in(p);
  if (!in) throw ConfigError("workload.length_table: cannot open '" + p.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_length_table(buf.str());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("workload.length_table '" + p.string() + "': " + e.what());
  }
}

WorkloadSpec ExperimentConfig::workload_spec() const {
  WorkloadSpec spec;
  spec.num_requests = workload.num_requests;
  spec.arrival = workload.arrival;
  spec.popularity = workload.popularity;
  spec.alpha = workload.alpha;
  spec.lengths = length_rows();
  spec.seed = workload.seed;
  return spec;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> errs;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };

  require(cost_model.peak_flops > 0, "cost_model.peak_flops must be > 0");
  require(cost_model.mem_bw > 0, "cost_model.mem_bw must be > 0");
  require(cost_model.kernel_overhead >= 0, "cost_model.kernel_overhead must be >= 0");
  require(cost_model.pcie_bw > 0, "cost_model.pcie_bw must be > 0");
  require(cost_model.elem_bytes == 1 || cost_model.elem_bytes == 2 ||
              cost_model.elem_bytes == 4 || cost_model.elem_bytes == 8,
          "cost_model.elem_bytes must be 1, 2, 4, or 8");
  require(cost_model.layers >= 1, "cost_model.layers must be >= 1");
  require(cost_model.hidden_dim >= 1, "cost_model.hidden_dim must be >= 1");
  require(cost_model.lora_rank >= 1 && cost_model.lora_rank <= cost_model.hidden_dim,
          "cost_model.lora_rank must be in [1, hidden_dim]");
  require(cost_model.projections_per_layer >= 1,
          "cost_model.projections_per_layer must be >= 1");
  require(cost_model.attn_coeff >= 0, "cost_model.attn_coeff must be >= 0");
  require(cost_model.flops_efficiency > 0 && cost_model.flops_efficiency <= 1,
          "cost_model.flops_efficiency must be in (0, 1]");

  require(kv_cache.page_size >= 1, "kvcache.page_size must be >= 1");
  require(kv_cache.kv_heads >= 1, "kvcache.kv_heads must be >= 1");
  require(kv_cache.head_dim >= 1, "kvcache.head_dim must be >= 1");
  require(kv_cache.total_pages >= 0, "kvcache.total_pages must be >= 0");

  require(scheduler.max_batch >= 1, "scheduler.max_batch must be >= 1");
  require(scheduler.lightly_loaded_threshold >= 0 &&
              scheduler.lightly_loaded_threshold <= scheduler.max_batch,
          "scheduler.lightly_loaded_threshold must be in [0, max_batch]");
  require(scheduler.headroom_tokens >= 0, "scheduler.headroom_tokens must be >= 0");

  require(cluster.gpu_count >= 1, "cluster.gpu_count must be >= 1");
  require(cluster.gpu_memory_gb > 0, "cluster.gpu_memory must be > 0");
  require(cluster.reserved_memory_gb >= 0, "cluster.reserved_memory must be >= 0");

  switch (workload.arrival.kind) {
    case ArrivalKind::Poisson:
      require(workload.arrival.rate > 0, "workload.arrival.rate must be > 0");
      [[fallthrough]];
    case ArrivalKind::Burst:
      require(workload.num_requests >= 1, "workload.num_requests must be >= 1");
      break;
    case ArrivalKind::Ramp:
      require(workload.arrival.peak_rate > 0, "workload.arrival.peak_rate must be > 0");
      require(workload.arrival.ramp_up_s > 0, "workload.arrival.ramp_up_s must be > 0");
      require(workload.arrival.ramp_down_s > 0, "workload.arrival.ramp_down_s must be > 0");
      require(workload.arrival.hold_s >= 0, "workload.arrival.hold_s must be >= 0");
      require(workload.num_requests >= 0, "workload.num_requests must be >= 0");
      break;
  }
  if (workload.popularity == Popularity::Skewed)
    require(workload.alpha > 1, "workload.alpha must be > 1 for skewed popularity");

  try {
    (void)length_rows();
  } catch (const ConfigError& e) {
    errs.push_back(e.what());
  }

  if (errs.empty()) {
    const int pages = kv_page_config().total_pages;
    if (pages < 1)
      errs.push_back("resolved kvcache.total_pages is " + std::to_string(pages) +
                     "; increase cluster.gpu_memory or set kvcache.total_pages");
  }

  if (!errs.empty()) {
    std::string joined = "invalid configuration:";
    for (const auto& e : errs) joined += "\n  - " + e;
    throw ConfigError(joined);
  }
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["cost_model"] = {{"peak_flops", cost_model.peak_flops},
                     {"mem_bw", cost_model.mem_bw},
                     {"kernel_overhead", cost_model.kernel_overhead},
                     {"pcie_bw", cost_model.pcie_bw},
                     {"elem_bytes", cost_model.elem_bytes},
                     {"layers", cost_model.layers},
                     {"hidden_dim", cost_model.hidden_dim},
                     {"lora_rank", cost_model.lora_rank},
                     {"projections_per_layer", cost_model.projections_per_layer},
                     {"attn_coeff", cost_model.attn_coeff},
                     {"flops_efficiency", cost_model.flops_efficiency}};
  j["kvcache"] = {{"page_size", kv_cache.page_size},
                   {"kv_heads", kv_cache.kv_heads},
                   {"head_dim", kv_cache.head_dim},
                   {"total_pages", kv_cache.total_pages}};
  j["scheduler"] = {{"max_batch", scheduler.max_batch},
                    {"lightly_loaded_threshold", scheduler.lightly_loaded_threshold},
                    {"headroom_tokens", scheduler.headroom_tokens}};
  j["cluster"] = {{"gpu_count", cluster.gpu_count},
                  {"gpu_memory", cluster.gpu_memory_gb},
                  {"reserved_memory", cluster.reserved_memory_gb}};
  json arrival = {{"rate", workload.arrival.rate},
                  {"peak_rate", workload.arrival.peak_rate},
                  {"ramp_up_s", workload.arrival.ramp_up_s},
                  {"hold_s", workload.arrival.hold_s},
                  {"ramp_down_s", workload.arrival.ramp_down_s}};
  switch (workload.arrival.kind) {
    case ArrivalKind::Poisson:
      arrival["kind"] = "poisson";
      break;
    case ArrivalKind::Burst:
      arrival["kind"] = "burst";
      break;
    case ArrivalKind::Ramp:
      arrival["kind"] = "ramp";
      break;
  }
  j["workload"] = {{"num_requests", workload.num_requests},
                   {"arrival", arrival},
                   {"popularity", to_string(workload.popularity)},
                   {"alpha", workload.alpha},
                   {"length_table", workload.length_table},
                   {"seed", workload.seed}};
  j["output"] = {{"dir", output.dir},
                 {"steps_csv", output.steps_csv},
                 {"summary_json", output.summary_json}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name,
                                   const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": JSON parse error at " + locate(text, e.byte) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError(source_name + ": top level must be an object");

  ExperimentConfig cfg;
  static const std::set<std::string> top = {"cost_model", "kvcache", "scheduler",
                                            "cluster",    "workload", "output"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!top.count(it.key())) throw ConfigError("unknown key '" + it.key() + "'");
  }
  if (j.contains("cost_model")) apply_cost_model(j["cost_model"], cfg.cost_model);
  if (j.contains("kvcache")) apply_kv_cache(j["kvcache"], cfg.kv_cache);
  if (j.contains("scheduler")) apply_scheduler(j["scheduler"], cfg.scheduler);
  if (j.contains("cluster")) apply_cluster(j["cluster"], cfg.cluster);
  if (j.contains("workload")) apply_workload(j["workload"], cfg.workload);
  if (j.contains("output")) apply_output(j["output"], cfg.output);

  cfg.base_dir = base_dir;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path,
                           std::filesystem::path(path).parent_path().string());
}

}  // namespace lorasim
