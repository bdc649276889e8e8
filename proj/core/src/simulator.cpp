#include "lorasim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace lorasim {

namespace {

std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
  return values[rank == 0 ? 0 : rank - 1];
}

}  // namespace

const char* to_string(BatchMode mode) {
  return mode == BatchMode::MultiLora ? "punica" : "baseline";
}

std::string MetricsLog::steps_csv() const {
  std::string out = "time,gpu,batch_size,tokens_emitted,queue_depth\n";
  for (const StepRecord& s : steps) {
    out += format_double(s.time, "%.9f");
    out += "," + std::to_string(s.gpu);
    out += "," + std::to_string(s.batch_size);
    out += "," + std::to_string(s.tokens_emitted);
    out += "," + std::to_string(s.queue_depth);
    out += "\n";
  }
  return out;
}

Summary MetricsLog::summarize() const {
  Summary s;
  s.total_requests = static_cast<int>(per_request.size());
  for (const RequestStats& r : per_request) {
    s.total_tokens += r.tokens_emitted;
    if (r.final_state == RequestState::Finished) ++s.finished_requests;
    else if (r.final_state == RequestState::Cancelled) ++s.cancelled_requests;
    else ++s.stranded_requests;
  }
  s.makespan_s = steps.empty() ? 0.0 : steps.back().time;
  s.throughput_tok_s =
      s.makespan_s > 0.0 ? static_cast<double>(s.total_tokens) / s.makespan_s : 0.0;
  s.p50_token_latency_s = percentile(token_step_latency, 0.50);
  s.p99_token_latency_s = percentile(token_step_latency, 0.99);
  s.migrations = migrations;
  s.oom_evictions = oom_evictions;
  s.peak_gpus_busy = peak_gpus_busy;
  if (!steps.empty()) {
    std::vector<double> sizes;
    sizes.reserve(steps.size());
    std::size_t le3 = 0;
    for (const StepRecord& st : steps) {
      sizes.push_back(st.batch_size);
      if (st.batch_size <= 3) ++le3;
    }
    s.batch_size_p50 = static_cast<int>(percentile(sizes, 0.50));
    s.batch_le3_share = static_cast<double>(le3) / static_cast<double>(steps.size());
  }
  return s;
}

std::string Summary::to_json_text() const {
  std::string out = "{\n";
  out += "  \"total_requests\": " + std::to_string(total_requests) + ",\n";
  out += "  \"finished_requests\": " + std::to_string(finished_requests) + ",\n";
  out += "  \"cancelled_requests\": " + std::to_string(cancelled_requests) + ",\n";
  out += "  \"stranded_requests\": " + std::to_string(stranded_requests) + ",\n";
  out += "  \"total_tokens\": " + std::to_string(total_tokens) + ",\n";
  out += "  \"makespan_s\": " + format_double(makespan_s, "%.9f") + ",\n";
  out += "  \"throughput_tok_s\": " + format_double(throughput_tok_s, "%.6f") + ",\n";
  out += "  \"p50_token_latency_s\": " + format_double(p50_token_latency_s, "%.9f") + ",\n";
  out += "  \"p99_token_latency_s\": " + format_double(p99_token_latency_s, "%.9f") + ",\n";
  out += "  \"migrations\": " + std::to_string(migrations) + ",\n";
  out += "  \"oom_evictions\": " + std::to_string(oom_evictions) + ",\n";
  out += "  \"peak_gpus_busy\": " + std::to_string(peak_gpus_busy) + ",\n";
  out += "  \"batch_size_p50\": " + std::to_string(batch_size_p50) + ",\n";
  out += "  \"batch_le3_share\": " + format_double(batch_le3_share, "%.6f") + "\n";
  out += "}\n";
  return out;
}

std::vector<std::pair<double, double>> windowed_throughput(const MetricsLog& log,
                                                           double window_s) {
  std::vector<std::pair<double, double>> out;
  if (window_s <= 0.0) throw std::invalid_argument("windowed_throughput: window must be > 0");
  if (log.steps.empty()) return out;
  const double horizon = log.steps.back().time;
  const std::size_t buckets = static_cast<std::size_t>(horizon / window_s) + 1;
  std::vector<double> tokens(buckets, 0.0);
  for (const StepRecord& s : log.steps) {
    std::size_t b = static_cast<std::size_t>(s.time / window_s);
    if (b >= buckets) b = buckets - 1;
    tokens[b] += s.tokens_emitted;
  }
  out.reserve(buckets);
  for (std::size_t b = 0; b < buckets; ++b)
    out.emplace_back(static_cast<double>(b) * window_s, tokens[b] / window_s);
  return out;
}

Simulator::Simulator(const ExperimentConfig& config, SimOptions options)
    : cfg_(config),
      opts_(std::move(options)),
      params_(config.cost_params()),
      sched_(SchedulerPolicy{config.scheduler.max_batch,
                             config.scheduler.lightly_loaded_threshold,
                             config.headroom_pages()}) {
  const KvPageConfig kv = cfg_.kv_page_config();
  cluster_.gpus.reserve(static_cast<std::size_t>(cfg_.cluster.gpu_count));
  for (int g = 0; g < cfg_.cluster.gpu_count; ++g) cluster_.gpus.emplace_back(g, kv);
  runtime_.resize(cluster_.gpus.size());
}

void Simulator::push_event(double time, int kind, int gpu, RequestId request, LoraId lora,
                           bool resubmit) {
  events_.push(Event{time, kind, event_seq_++, gpu, request, lora, resubmit});
}

MetricsLog Simulator::run() {
  const GeneratedWorkload g = generate(cfg_.workload_spec());
  std::vector<SeedRequest> seeds(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    seeds[i] = SeedRequest{g.arrival[i], g.lora[i], g.prompt_len[i], g.output_len[i]};
  }
  return run_requests(seeds);
}

MetricsLog Simulator::run_requests(const std::vector<SeedRequest>& seeds) {
  std::vector<SeedRequest> ordered = seeds;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SeedRequest& a, const SeedRequest& b) { return a.arrival < b.arrival; });

  cluster_.requests.clear();
  cluster_.requests.reserve(ordered.size());
  log_ = MetricsLog{};
  log_.per_request.resize(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const SeedRequest& s = ordered[i];
    if (s.prompt_len < 1 || s.output_len < 1)
      throw std::invalid_argument("Simulator: request lengths must be >= 1");
    Request r;
    r.id = static_cast<RequestId>(i);
    r.lora_id = s.lora;
    r.prompt_len = s.prompt_len;
    r.target_output_len = s.output_len;
    r.arrival_time = s.arrival;
    r.restart_prompt_len = s.prompt_len;
    cluster_.requests.push_back(r);
    log_.per_request[i].arrival = s.arrival;
    log_.per_request[i].target = s.output_len;
    push_event(s.arrival, 3, -1, r.id, 0);
  }

  pending_injections_ = opts_.injections;
  for (const auto& inj : pending_injections_) {
    if (inj.request < 0 || inj.request >= static_cast<RequestId>(ordered.size()))
      throw std::invalid_argument("Simulator: injection request id out of range");
    if (inj.after_tokens < 1)
      throw std::invalid_argument("Simulator: injection after_tokens must be >= 1");
  }

  while (!events_.empty()) {
    const Event ev = events_.top();
    events_.pop();
    log_.end_time = ev.time;
    switch (ev.kind) {
      case 0:
        commit_step(ev.gpu, ev.time);
        break;
      case 1:
        handle_cancel_delivered(ev.gpu, ev.request, ev.resubmit, ev.time);
        break;
      case 2:
        handle_adapter_loaded(ev.gpu, ev.time);
        break;
      case 3:
        handle_arrival(ev.request, ev.time);
        break;
      default:
        throw std::logic_error("Simulator: unknown event kind");
    }
  }

  for (std::size_t i = 0; i < cluster_.requests.size(); ++i)
    log_.per_request[i].final_state = cluster_.requests[i].state;
  return std::move(log_);
}

void Simulator::handle_arrival(RequestId id, double t) {
  sched_.enqueue(cluster_, id);
  apply_placements(sched_.drain_queue(cluster_), t);
  note_scaling(t);
}

void Simulator::handle_adapter_loaded(int gpu, double t) { maybe_start_step(gpu, t); }

void Simulator::handle_cancel_delivered(int gpu, RequestId id, bool resubmit_flag, double t) {
  Request& r = cluster_.req(id);
  if (r.state != RequestState::Running || r.gpu != gpu) return;  // stale delivery
  if (runtime_[static_cast<std::size_t>(gpu)].inflight) {
    // Applies after the batch in flight completes; that batch's token for
    // this request is dropped.
    if (resubmit_flag)
      r.migrate_pending = true;
    else
      r.cancel_pending = true;
    return;
  }
  sched_.remove_from_gpu(cluster_, id);
  if (resubmit_flag) {
    r.state = RequestState::Migrating;
    ++r.migrations;
    ++log_.migrations;
    ++log_.per_request[static_cast<std::size_t>(id)].migrations;
    log_.disturbances.push_back(Disturbance{t, gpu, id, DisturbanceKind::InjectedMigration});
    resubmit(id, t);
  } else {
    r.state = RequestState::Cancelled;
  }
  apply_placements(sched_.drain_queue(cluster_), t);
  note_scaling(t);
}

BatchPlan plan_batch(const ClusterState& cluster, int gpu, double now, BatchMode mode) {
  const GpuState& g = cluster.gpus[static_cast<std::size_t>(gpu)];
  BatchPlan plan;
  plan.gpu = gpu;

  std::vector<RequestId> eligible;
  eligible.reserve(g.working_set.size());
  for (RequestId id : g.working_set) {
    const Request& r = cluster.req(id);
    const auto it = g.adapter_ready_time.find(r.lora_id);
    if (it != g.adapter_ready_time.end() && it->second <= now) eligible.push_back(id);
  }
  std::sort(eligible.begin(), eligible.end());
  if (eligible.empty()) return plan;

  std::vector<RequestId> pool;
  if (mode == BatchMode::SingleLora) {
    // One adapter per invocation, in request order: serve the adapter of the
    // oldest eligible request plus everyone sharing it. Systems without a
    // multi-adapter kernel batch exactly this way, which is why their batch
    // sizes collapse when adapters are diverse.
    const LoraId serving = cluster.req(eligible.front()).lora_id;
    for (RequestId id : eligible)
      if (cluster.req(id).lora_id == serving) pool.push_back(id);
  } else {
    pool = eligible;
  }

  // At most one prefill per invocation; oldest pending prefill first.
  std::map<LoraId, std::vector<RequestId>> decode_groups;
  for (RequestId id : pool) {
    const Request& r = cluster.req(id);
    if (!r.prefill_done) {
      if (!plan.prefill) plan.prefill = id;
    } else {
      decode_groups[r.lora_id].push_back(id);
    }
  }

  std::vector<LoraId> group_order;
  group_order.reserve(decode_groups.size());
  if (plan.prefill) {
    const LoraId pl = cluster.req(*plan.prefill).lora_id;
    if (decode_groups.count(pl)) group_order.push_back(pl);
  }
  for (const auto& [lora, members] : decode_groups) {
    if (!group_order.empty() && group_order.front() == lora) continue;
    group_order.push_back(lora);
  }

  plan.segment_boundaries.push_back(0);
  std::size_t acc = 0;
  auto push_rows = [&](LoraId lora, std::size_t rows) {
    acc += rows;
    if (!plan.segment_loras.empty() && plan.segment_loras.back() == lora) {
      plan.segment_boundaries.back() = acc;
    } else {
      plan.segment_loras.push_back(lora);
      plan.segment_boundaries.push_back(acc);
    }
  };
  if (plan.prefill) {
    const Request& r = cluster.req(*plan.prefill);
    push_rows(r.lora_id, static_cast<std::size_t>(r.restart_prompt_len));
  }
  for (LoraId lora : group_order) {
    const auto& members = decode_groups[lora];
    for (RequestId id : members) plan.decodes.push_back(id);
    push_rows(lora, members.size());
  }
  plan.total_rows = acc;
  return plan;
}

void Simulator::maybe_start_step(int gpu, double t) {
  GpuRuntime& rt = runtime_[static_cast<std::size_t>(gpu)];
  if (rt.inflight) return;
  BatchPlan plan = plan_batch(cluster_, gpu, t, opts_.mode);
  if (plan.request_count() == 0) return;

  std::vector<StepInput> inputs;
  inputs.reserve(static_cast<std::size_t>(plan.request_count()));
  if (plan.prefill) {
    const Request& r = cluster_.req(*plan.prefill);
    inputs.push_back(StepInput{0, true, r.restart_prompt_len});
  }
  for (RequestId id : plan.decodes) {
    const Request& r = cluster_.req(id);
    inputs.push_back(StepInput{r.seq_len(), false, 0});
  }
  const double dur = decode_step_latency(inputs, params_);
  rt.step_start = t;
  rt.inflight = std::move(plan);
  ++busy_gpus_;
  update_busy_peak();
  push_event(t + dur, 0, gpu, -1, 0);
}

void Simulator::commit_step(int gpu, double t) {
  GpuRuntime& rt = runtime_[static_cast<std::size_t>(gpu)];
  if (!rt.inflight) throw std::logic_error("commit_step: no batch in flight");
  const BatchPlan plan = std::move(*rt.inflight);
  rt.inflight.reset();
  --busy_gpus_;
  const double step_dur = t - rt.step_start;
  GpuState& g = cluster_.gpus[static_cast<std::size_t>(gpu)];

  auto count_step = [&](RequestId id) { ++log_.per_request[static_cast<std::size_t>(id)].steps; };
  if (plan.prefill) count_step(*plan.prefill);
  for (RequestId id : plan.decodes) count_step(id);

  // Cancellations and migrations delivered during the batch apply now; their
  // in-flight token from this batch is dropped.
  std::vector<RequestId> resubmit_list;
  {
    std::vector<RequestId> residents = g.working_set;
    std::sort(residents.begin(), residents.end());
    for (RequestId id : residents) {
      Request& r = cluster_.req(id);
      if (r.cancel_pending) {
        r.cancel_pending = false;
        sched_.remove_from_gpu(cluster_, id);
        r.state = RequestState::Cancelled;
      } else if (r.migrate_pending) {
        r.migrate_pending = false;
        sched_.remove_from_gpu(cluster_, id);
        r.state = RequestState::Migrating;
        r.prefill_done = false;
        ++r.migrations;
        ++log_.migrations;
        ++log_.per_request[static_cast<std::size_t>(id)].migrations;
        log_.disturbances.push_back(
            Disturbance{t, gpu, id, DisturbanceKind::InjectedMigration});
        resubmit_list.push_back(id);
      }
    }
  }

  int emitted = 0;

  // Extend-then-emit for one surviving request; extend refusal triggers
  // newest-first eviction until the page fits or the request itself leaves.
  auto emit_token = [&](RequestId id) {
    Request& r = cluster_.req(id);
    if (r.state != RequestState::Running || r.gpu != gpu) return;  // left during this commit
    if (!g.kv.extend(id, 1)) {
      std::vector<RequestId> victims = sched_.evict_until(
          cluster_, gpu, id, [&]() { return g.kv.extend(id, 1); });
      for (RequestId v : victims) {
        ++log_.oom_evictions;
        ++log_.migrations;
        ++log_.per_request[static_cast<std::size_t>(v)].migrations;
        ++cluster_.req(v).migrations;
        log_.disturbances.push_back(Disturbance{t, gpu, v, DisturbanceKind::OomEviction});
        resubmit_list.push_back(v);
      }
      if (r.state != RequestState::Running) return;  // evicted itself; token dropped
    }
    ++r.generated;
    RequestStats& stats = log_.per_request[static_cast<std::size_t>(id)];
    ++stats.tokens_emitted;
    if (stats.tokens_emitted == 1) stats.first_token = t;
    log_.token_step_latency.push_back(step_dur);
    ++emitted;
    if (r.done()) {
      sched_.remove_from_gpu(cluster_, id);
      r.state = RequestState::Finished;
      stats.finished = t;
    }
  };

  if (plan.prefill) {
    Request& r = cluster_.req(*plan.prefill);
    if (r.state == RequestState::Running && r.gpu == gpu) {
      r.prefill_done = true;
      emit_token(*plan.prefill);
    }
  }
  for (RequestId id : plan.decodes) emit_token(id);

  // Evicted requests recompute prefill over prompt plus everything generated.
  for (RequestId id : resubmit_list) resubmit(id, t);

  apply_placements(sched_.drain_queue(cluster_), t);

  // Forced-migration hooks fire once their token count is reached; delivery
  // is a CancelDelivered event that lands before any later step completes.
  for (auto& inj : pending_injections_) {
    if (inj.request < 0) continue;  // consumed
    Request& r = cluster_.req(inj.request);
    if (r.state == RequestState::Finished || r.state == RequestState::Cancelled) {
      inj.request = -1;
      continue;
    }
    if (r.state == RequestState::Running && r.generated == inj.after_tokens) {
      push_event(t, 1, r.gpu, inj.request, 0, inj.resubmit);
      inj.request = -1;
    }
  }

  StepRecord rec;
  rec.time = t;
  rec.gpu = gpu;
  rec.batch_size = plan.request_count();
  rec.tokens_emitted = emitted;
  rec.queue_depth = static_cast<int>(sched_.queue_depth());
  rec.working_set = static_cast<int>(g.working_set.size());
  log_.steps.push_back(rec);

  note_scaling(t);
  maybe_start_step(gpu, t);
}

void Simulator::resubmit(RequestId id, double t) {
  Request& r = cluster_.req(id);
  r.restart_prompt_len = r.prompt_len + r.generated;
  r.prefill_done = false;
  const auto gpu = sched_.place(cluster_, r);
  if (gpu) {
    sched_.commit_placement(cluster_, id, *gpu);
    post_placement(id, *gpu, t);
  } else {
    sched_.enqueue(cluster_, id);
  }
}

void Simulator::apply_placements(const std::vector<std::pair<RequestId, int>>& placed,
                                 double t) {
  for (const auto& [id, gpu] : placed) post_placement(id, gpu, t);
}

void Simulator::post_placement(RequestId id, int gpu, double t) {
  GpuState& g = cluster_.gpus[static_cast<std::size_t>(gpu)];
  const Request& r = cluster_.req(id);
  if (!g.adapter_ready_time.count(r.lora_id)) {
    const double ready = t + adapter_load_latency(params_.layers, params_);
    g.adapter_ready_time.emplace(r.lora_id, ready);
    push_event(ready, 2, gpu, -1, r.lora_id);
  }
  maybe_start_step(gpu, t);
}

void Simulator::note_scaling(double t) {
  const ScalingSignal sig = sched_.scaling_signal(cluster_);
  if (log_.scaling.empty() || log_.scaling.back().kind != sig.kind)
    log_.scaling.push_back(ScalingRecord{t, sig.kind});
}

void Simulator::update_busy_peak() {
  if (busy_gpus_ > log_.peak_gpus_busy) log_.peak_gpus_busy = busy_gpus_;
}

}  // namespace lorasim
