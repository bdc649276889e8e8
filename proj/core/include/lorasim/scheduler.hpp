#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "lorasim/kv_cache.hpp"
#include "lorasim/sgmv.hpp"

namespace lorasim {

enum class RequestState { Queued, Running, Migrating, Finished, Cancelled };

// One generation request. id is the admission sequence number (arrival order);
// restart_prompt_len is what the next prefill must recompute: the original
// prompt plus every token generated before the most recent placement.
struct Request {
  RequestId id = -1;
  LoraId lora_id = 0;
  int prompt_len = 0;
  int target_output_len = 0;
  double arrival_time = 0.0;

  RequestState state = RequestState::Queued;
  int generated = 0;
  int gpu = -1;
  int restart_prompt_len = 0;
  bool prefill_done = false;
  int migrations = 0;
  bool cancel_pending = false;
  bool migrate_pending = false;

  int seq_len() const { return restart_prompt_len + generated; }
  bool done() const { return generated >= target_output_len; }
};

struct GpuState {
  GpuState(int uuid_, KvPageConfig kv_cfg) : uuid(uuid_), kv(kv_cfg) {}

  int uuid;
  KvCacheAllocator kv;
  std::vector<RequestId> working_set;           // placement order
  std::map<LoraId, double> adapter_ready_time;  // load completion timestamps

  bool in_working_set(RequestId id) const;
};

struct ClusterState {
  std::vector<GpuState> gpus;
  std::vector<Request> requests;  // indexed by RequestId

  Request& req(RequestId id) { return requests[static_cast<std::size_t>(id)]; }
  const Request& req(RequestId id) const { return requests[static_cast<std::size_t>(id)]; }
};

enum class ScalingKind { NeedMore, SteadyState, CanRelease };

struct ScalingSignal {
  ScalingKind kind = ScalingKind::SteadyState;
  std::vector<int> releasable_gpus;  // lightly loaded, drainable
};

struct SchedulerPolicy {
  int max_batch = 32;
  int lightly_loaded_threshold = 16;
  int headroom_pages = 7;
};

// Placement, admission queue, and eviction policy. Time-domain effects
// (adapter load latency, step scheduling) belong to the caller.
class Scheduler {
 public:
  explicit Scheduler(SchedulerPolicy policy) : policy_(policy) {}

  const SchedulerPolicy& policy() const { return policy_; }

  // Largest admissible working set wins; ties go to the higher GPU uuid.
  // Admissible: working set below max_batch and KvCache fits the request's
  // restart prompt plus the configured headroom.
  std::optional<int> place(const ClusterState& cluster, const Request& r) const;

  // Appends an arriving request (ids arrive in order) or re-inserts an
  // evicted one at its admission-order position.
  void enqueue(ClusterState& cluster, RequestId id);

  // Reserves KvCache and joins the working set. The caller must have checked
  // admissibility via place().
  void commit_placement(ClusterState& cluster, RequestId id, int gpu);

  // Strict FCFS: pops and places from the head only; the head blocks the
  // queue until it fits somewhere. Returns committed (request, gpu) pairs.
  std::vector<std::pair<RequestId, int>> drain_queue(ClusterState& cluster);

  // Detaches a queued request; returns false if it was not queued.
  bool cancel_queued(ClusterState& cluster, RequestId id);

  // Frees a request's KvCache and working-set slot (any reason).
  void remove_from_gpu(ClusterState& cluster, RequestId id);

  // Highest admission id resident on the GPU.
  RequestId newest_on(const GpuState& gpu) const;

  // Evicts newest-first from `gpu` until retry() succeeds, marking victims
  // Migrating. Stops early if `blocked` itself gets evicted (retry is then
  // moot). Victims are returned in eviction order; the caller resubmits them.
  std::vector<RequestId> evict_until(ClusterState& cluster, int gpu, RequestId blocked,
                                     const std::function<bool()>& retry);

  // NeedMore when every working set is at or above the lightly-loaded
  // threshold; CanRelease when some GPU is idle (empty working set), listing
  // the idle ones; SteadyState otherwise.
  ScalingSignal scaling_signal(const ClusterState& cluster) const;

  const std::deque<RequestId>& queue() const { return queue_; }
  std::size_t queue_depth() const { return queue_.size(); }

 private:
  SchedulerPolicy policy_;
  std::deque<RequestId> queue_;  // ascending admission id
};

}  // namespace lorasim
