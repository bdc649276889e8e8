#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "lorasim/config.hpp"
#include "lorasim/cost_model.hpp"
#include "lorasim/scheduler.hpp"
#include "lorasim/workload.hpp"

namespace lorasim {

// Batch admission rule. MultiLora batches across adapters through the
// segmented kernels ("punica" on the command line); SingleLora restricts each
// invocation to one adapter ("baseline").
enum class BatchMode { MultiLora, SingleLora };

// One model invocation on one GPU: at most one prefill plus decode rows,
// grouped so same-adapter rows are contiguous.
struct BatchPlan {
  int gpu = -1;
  std::optional<RequestId> prefill;
  std::vector<RequestId> decodes;  // grouped by adapter, ids ascending within
  std::vector<std::size_t> segment_boundaries;
  std::vector<LoraId> segment_loras;
  std::size_t total_rows = 0;

  int request_count() const {
    return static_cast<int>(decodes.size()) + (prefill ? 1 : 0);
  }
};

// Plans one invocation for a GPU at time `now`: the oldest pending prefill
// (at most one) plus every decode-ready request whose adapter has loaded,
// with same-adapter rows contiguous and the prefill's adapter group adjacent
// to its matching decode rows. SingleLora mode first restricts the pool to
// the adapter of the oldest eligible request.
BatchPlan plan_batch(const ClusterState& cluster, int gpu, double now, BatchMode mode);

struct StepRecord {
  double time = 0.0;  // completion timestamp
  int gpu = 0;
  int batch_size = 0;       // requests in the invocation
  int tokens_emitted = 0;
  int queue_depth = 0;      // admission queue after this step's drain
  int working_set = 0;      // residents after this step (extra, not in CSV)
};

struct RequestStats {
  double arrival = 0.0;
  double first_token = -1.0;
  double finished = -1.0;
  int tokens_emitted = 0;
  int steps = 0;
  int migrations = 0;
  int target = 0;
  RequestState final_state = RequestState::Queued;
};

enum class DisturbanceKind { OomEviction, InjectedMigration };

struct Disturbance {
  double time = 0.0;
  int gpu = 0;
  RequestId request = -1;
  DisturbanceKind kind = DisturbanceKind::OomEviction;
};

struct ScalingRecord {
  double time = 0.0;
  ScalingKind kind = ScalingKind::SteadyState;
};

struct Summary {
  int total_requests = 0;
  int finished_requests = 0;
  int cancelled_requests = 0;
  int stranded_requests = 0;
  std::int64_t total_tokens = 0;
  double makespan_s = 0.0;
  double throughput_tok_s = 0.0;
  double p50_token_latency_s = 0.0;
  double p99_token_latency_s = 0.0;
  int migrations = 0;
  int oom_evictions = 0;
  int peak_gpus_busy = 0;
  int batch_size_p50 = 0;
  double batch_le3_share = 0.0;  // busy steps with at most 3 requests

  std::string to_json_text() const;
};

struct MetricsLog {
  std::vector<StepRecord> steps;
  std::vector<double> token_step_latency;  // duration of the emitting step
  std::vector<RequestStats> per_request;
  std::vector<Disturbance> disturbances;
  std::vector<ScalingRecord> scaling;
  int migrations = 0;
  int oom_evictions = 0;
  int peak_gpus_busy = 0;
  double end_time = 0.0;

  Summary summarize() const;
  std::string steps_csv() const;  // schema: time,gpu,batch_size,tokens_emitted,queue_depth
};

// Windowed throughput series over the step records: one (window_start,
// tokens/s) sample per window of the given width.
std::vector<std::pair<double, double>> windowed_throughput(const MetricsLog& log,
                                                           double window_s);

struct SimOptions {
  BatchMode mode = BatchMode::MultiLora;
  // Test hooks: deliver a cancellation to request r once it has generated k
  // tokens; with resubmit=true the request is re-placed (a forced migration),
  // otherwise it terminates Cancelled.
  struct Injection {
    RequestId request = -1;
    int after_tokens = 0;
    bool resubmit = true;
  };
  std::vector<Injection> injections;
};

class Simulator {
 public:
  Simulator(const ExperimentConfig& config, SimOptions options = {});

  // Generates the workload from config and runs every event to completion.
  MetricsLog run();

  // Same engine over an explicit request list (arrival-sorted).
  struct SeedRequest {
    double arrival = 0.0;
    LoraId lora = 0;
    int prompt_len = 0;
    int output_len = 0;
  };
  MetricsLog run_requests(const std::vector<SeedRequest>& seeds);

 private:
  struct Event {
    double time;
    int kind;  // 0 StepComplete, 1 CancelDelivered, 2 AdapterLoaded, 3 Arrival
    std::uint64_t seq;
    int gpu;
    RequestId request;
    LoraId lora;
    bool resubmit;  // kind 1 only: true migrates the request, false cancels it
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.seq > b.seq;
    }
  };
  struct GpuRuntime {
    std::optional<BatchPlan> inflight;
    double step_start = 0.0;
  };

  void push_event(double time, int kind, int gpu, RequestId request, LoraId lora,
                  bool resubmit = true);
  void handle_arrival(RequestId id, double t);
  void handle_adapter_loaded(int gpu, double t);
  void handle_cancel_delivered(int gpu, RequestId id, bool resubmit_flag, double t);
  void commit_step(int gpu, double t);
  void maybe_start_step(int gpu, double t);
  void apply_placements(const std::vector<std::pair<RequestId, int>>& placed, double t);
  void post_placement(RequestId id, int gpu, double t);
  void resubmit(RequestId id, double t);
  void note_scaling(double t);
  void update_busy_peak();

  ExperimentConfig cfg_;
  SimOptions opts_;
  CostParams params_;
  ClusterState cluster_;
  Scheduler sched_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::uint64_t event_seq_ = 0;
  std::vector<GpuRuntime> runtime_;
  std::vector<SimOptions::Injection> pending_injections_;
  MetricsLog log_;
  int busy_gpus_ = 0;
};

const char* to_string(BatchMode mode);

}  // namespace lorasim
