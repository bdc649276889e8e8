#include "lorasim/scheduler.hpp"

#include <algorithm>
#include <stdexcept>

namespace lorasim {

bool GpuState::in_working_set(RequestId id) const {
  return std::find(working_set.begin(), working_set.end(), id) != working_set.end();
}

std::optional<int> Scheduler::place(const ClusterState& cluster, const Request& r) const {
  int best = -1;
  std::size_t best_size = 0;
  int best_uuid = -1;
  for (std::size_t g = 0; g < cluster.gpus.size(); ++g) {
    const GpuState& gpu = cluster.gpus[g];
    if (gpu.working_set.size() >= static_cast<std::size_t>(policy_.max_batch)) continue;
    if (!gpu.kv.can_admit(r.restart_prompt_len, policy_.headroom_pages)) continue;
    if (best < 0 || gpu.working_set.size() > best_size ||
        (gpu.working_set.size() == best_size && gpu.uuid > best_uuid)) {
      best = static_cast<int>(g);
      best_size = gpu.working_set.size();
      best_uuid = gpu.uuid;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

void Scheduler::enqueue(ClusterState& cluster, RequestId id) {
  Request& r = cluster.req(id);
  r.state = RequestState::Queued;
  r.gpu = -1;
  auto pos = std::lower_bound(queue_.begin(), queue_.end(), id);
  if (pos != queue_.end() && *pos == id)
    throw std::invalid_argument("Scheduler::enqueue: id already queued");
  queue_.insert(pos, id);
}

void Scheduler::commit_placement(ClusterState& cluster, RequestId id, int gpu) {
  Request& r = cluster.req(id);
  GpuState& g = cluster.gpus[static_cast<std::size_t>(gpu)];
  if (g.working_set.size() >= static_cast<std::size_t>(policy_.max_batch))
    throw std::logic_error("commit_placement: working set full");
  if (!g.kv.reserve(id, r.restart_prompt_len))
    throw std::logic_error("commit_placement: reservation failed after admission check");
  g.working_set.push_back(id);
  r.state = RequestState::Running;
  r.gpu = gpu;
  r.prefill_done = false;
}

std::vector<std::pair<RequestId, int>> Scheduler::drain_queue(ClusterState& cluster) {
  std::vector<std::pair<RequestId, int>> placed;
  while (!queue_.empty()) {
    const RequestId head = queue_.front();
    const auto gpu = place(cluster, cluster.req(head));
    if (!gpu) break;  // head-of-line blocking
    queue_.pop_front();
    commit_placement(cluster, head, *gpu);
    placed.emplace_back(head, *gpu);
  }
  return placed;
}

bool Scheduler::cancel_queued(ClusterState& cluster, RequestId id) {
  auto pos = std::lower_bound(queue_.begin(), queue_.end(), id);
  if (pos == queue_.end() || *pos != id) return false;
  queue_.erase(pos);
  cluster.req(id).state = RequestState::Cancelled;
  return true;
}

void Scheduler::remove_from_gpu(ClusterState& cluster, RequestId id) {
  Request& r = cluster.req(id);
  if (r.gpu < 0) throw std::invalid_argument("remove_from_gpu: request not placed");
  GpuState& g = cluster.gpus[static_cast<std::size_t>(r.gpu)];
  auto pos = std::find(g.working_set.begin(), g.working_set.end(), id);
  if (pos == g.working_set.end())
    throw std::logic_error("remove_from_gpu: request missing from working set");
  g.working_set.erase(pos);
  g.kv.release(id);
  r.gpu = -1;
}

RequestId Scheduler::newest_on(const GpuState& gpu) const {
  if (gpu.working_set.empty()) throw std::logic_error("newest_on: empty working set");
  return *std::max_element(gpu.working_set.begin(), gpu.working_set.end());
}

std::vector<RequestId> Scheduler::evict_until(ClusterState& cluster, int gpu, RequestId blocked,
                                              const std::function<bool()>& retry) {
  std::vector<RequestId> victims;
  GpuState& g = cluster.gpus[static_cast<std::size_t>(gpu)];
  while (!retry()) {
    if (g.working_set.empty())
      throw std::logic_error("evict_until: nothing left to evict and retry still failing");
    const RequestId victim = newest_on(g);
    remove_from_gpu(cluster, victim);
    Request& v = cluster.req(victim);
    v.state = RequestState::Migrating;
    v.prefill_done = false;
    victims.push_back(victim);
    if (victim == blocked) break;  // the blocked request itself left the GPU
  }
  return victims;
}

ScalingSignal Scheduler::scaling_signal(const ClusterState& cluster) const {
  ScalingSignal sig;
  bool all_loaded = true;
  for (const GpuState& g : cluster.gpus) {
    if (g.working_set.size() < static_cast<std::size_t>(policy_.lightly_loaded_threshold))
      all_loaded = false;
    if (g.working_set.empty()) sig.releasable_gpus.push_back(g.uuid);
  }
  if (all_loaded && !cluster.gpus.empty()) {
    sig.kind = ScalingKind::NeedMore;
    sig.releasable_gpus.clear();
  } else if (!sig.releasable_gpus.empty()) {
    sig.kind = ScalingKind::CanRelease;
  } else {
    sig.kind = ScalingKind::SteadyState;
  }
  return sig;
}

}  // namespace lorasim
