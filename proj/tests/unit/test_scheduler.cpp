#include "doctest.h"

#include <algorithm>

#include "lorasim/scheduler.hpp"

using namespace lorasim;

namespace {

KvPageConfig pages(int total) {
  KvPageConfig cfg;
  cfg.total_pages = total;
  return cfg;
}

ClusterState cluster_of(int gpus, int total_pages) {
  ClusterState c;
  for (int g = 0; g < gpus; ++g) c.gpus.emplace_back(g, pages(total_pages));
  return c;
}

// Registers a request; does not queue or place it.
RequestId add_request(ClusterState& c, int prompt, int target, LoraId lora = 0) {
  Request r;
  r.id = static_cast<RequestId>(c.requests.size());
  r.lora_id = lora;
  r.prompt_len = prompt;
  r.restart_prompt_len = prompt;
  r.target_output_len = target;
  c.requests.push_back(r);
  return r.id;
}

SchedulerPolicy policy(int max_batch = 32, int light = 16, int headroom = 1) {
  return SchedulerPolicy{max_batch, light, headroom};
}

void force_place(ClusterState& c, Scheduler& s, RequestId id, int gpu) {
  s.commit_placement(c, id, gpu);
}

}  // namespace

TEST_CASE("placement prefers the largest admissible working set, ties to uuid") {
  ClusterState c = cluster_of(3, 1000);
  Scheduler s(policy());
  // gpu0: 2 residents, gpu1: 4, gpu2: 4.
  for (int i = 0; i < 2; ++i) force_place(c, s, add_request(c, 16, 10), 0);
  for (int i = 0; i < 4; ++i) force_place(c, s, add_request(c, 16, 10), 1);
  for (int i = 0; i < 4; ++i) force_place(c, s, add_request(c, 16, 10), 2);

  const RequestId r = add_request(c, 16, 10);
  auto g = s.place(c, c.req(r));
  REQUIRE(g.has_value());
  CHECK(*g == 2); // 4-way tie between gpu1 and gpu2 goes to the higher uuid
}

TEST_CASE("placement skips full batches and kv-starved gpus") {
  ClusterState c = cluster_of(2, 1000);
  Scheduler s(policy(4));
  for (int i = 0; i < 4; ++i) force_place(c, s, add_request(c, 16, 10), 1); // full
  force_place(c, s, add_request(c, 16, 10), 0);

  const RequestId r = add_request(c, 16, 10);
  CHECK(s.place(c, c.req(r)) == 0); // gpu1 has the bigger set but no slot

  // Starve gpu0's cache: admissibility needs prompt pages + headroom.
  ClusterState tight = cluster_of(1, 2);
  Scheduler s2(policy(32, 16, 1));
  const RequestId a = add_request(tight, 16, 10);
  force_place(tight, s2, a, 0); // 1 page held, 1 free
  const RequestId b = add_request(tight, 16, 10);
  CHECK_FALSE(s2.place(tight, tight.req(b)).has_value()); // 1 + headroom 1 > 1 free

  ClusterState roomy = cluster_of(1, 3);
  Scheduler s3(policy(32, 16, 1));
  const RequestId a2 = add_request(roomy, 16, 10);
  force_place(roomy, s3, a2, 0);
  const RequestId b2 = add_request(roomy, 16, 10);
  CHECK(s3.place(roomy, roomy.req(b2)) == 0);
}

TEST_CASE("placement uses the restart prompt, not the original") {
  ClusterState c = cluster_of(1, 3);
  Scheduler s(policy(32, 16, 1));
  const RequestId r = add_request(c, 16, 50);
  c.req(r).generated = 30;            // 30 tokens already produced elsewhere
  c.req(r).restart_prompt_len = 46;   // prompt + generated must be recomputed
  CHECK_FALSE(s.place(c, c.req(r)).has_value()); // needs 3 pages + 1 headroom
  ClusterState big = cluster_of(1, 4);
  Scheduler s2(policy(32, 16, 1));
  const RequestId r2 = add_request(big, 16, 50);
  big.req(r2).restart_prompt_len = 46;
  CHECK(s2.place(big, big.req(r2)) == 0);
}

TEST_CASE("commit placement reserves pages and joins the working set") {
  ClusterState c = cluster_of(1, 10);
  Scheduler s(policy());
  const RequestId r = add_request(c, 33, 10); // 3 pages
  force_place(c, s, r, 0);
  CHECK(c.gpus[0].kv.pages_held(r) == 3);
  CHECK(c.req(r).state == RequestState::Running);
  CHECK(c.req(r).gpu == 0);
  CHECK(c.gpus[0].in_working_set(r));
}

TEST_CASE("queue is strict fcfs with head-of-line blocking") {
  ClusterState c = cluster_of(1, 4);
  Scheduler s(policy(32, 16, 1));
  const RequestId big = add_request(c, 64, 10);   // 4 pages; can never fit with headroom
  const RequestId tiny = add_request(c, 1, 10);   // 1 page
  s.enqueue(c, big);
  s.enqueue(c, tiny);
  const auto placed = s.drain_queue(c);
  CHECK(placed.empty()); // head blocks even though tiny would fit
  CHECK(s.queue_depth() == 2);

  // Once the head fits, both drain in order.
  ClusterState c2 = cluster_of(1, 6);
  Scheduler s2(policy(32, 16, 1));
  const RequestId a = add_request(c2, 64, 10);
  const RequestId b = add_request(c2, 1, 10);
  s2.enqueue(c2, a);
  s2.enqueue(c2, b);
  const auto placed2 = s2.drain_queue(c2);
  REQUIRE(placed2.size() == 2);
  CHECK(placed2[0].first == a);
  CHECK(placed2[1].first == b);
  CHECK(s2.queue_depth() == 0);
}

TEST_CASE("evicted requests rejoin at admission order") {
  ClusterState c = cluster_of(1, 100);
  Scheduler s(policy());
  const RequestId r0 = add_request(c, 16, 10);
  const RequestId r1 = add_request(c, 16, 10);
  const RequestId r2 = add_request(c, 16, 10);
  s.enqueue(c, r0);
  s.enqueue(c, r2);
  s.enqueue(c, r1); // returns mid-queue, not at the tail
  CHECK(s.queue()[0] == r0);
  CHECK(s.queue()[1] == r1);
  CHECK(s.queue()[2] == r2);
}

TEST_CASE("cancel queued removes without placing") {
  ClusterState c = cluster_of(1, 100);
  Scheduler s(policy());
  const RequestId r0 = add_request(c, 16, 10);
  const RequestId r1 = add_request(c, 16, 10);
  s.enqueue(c, r0);
  s.enqueue(c, r1);
  CHECK(s.cancel_queued(c, r0));
  CHECK_FALSE(s.cancel_queued(c, r0));
  CHECK(s.queue_depth() == 1);
  CHECK(s.queue()[0] == r1);
}

TEST_CASE("eviction pops the newest admission first") {
  ClusterState c = cluster_of(1, 100);
  Scheduler s(policy());
  const RequestId r1 = add_request(c, 16, 10);
  const RequestId r5 = add_request(c, 16, 10);
  const RequestId r9 = add_request(c, 16, 10);
  // Place out of order; admission id decides, not placement order.
  force_place(c, s, r9, 0);
  force_place(c, s, r1, 0);
  force_place(c, s, r5, 0);
  CHECK(s.newest_on(c.gpus[0]) == r9);

  int calls = 0;
  const auto victims = s.evict_until(c, 0, r1, [&] { return ++calls > 2; });
  REQUIRE(victims.size() == 2);
  CHECK(victims[0] == r9);
  CHECK(victims[1] == r5);
  CHECK(c.req(r9).state == RequestState::Migrating);
  CHECK(c.req(r9).prefill_done == false);
  CHECK(c.gpus[0].kv.pages_held(r9) == 0);
  CHECK(c.req(r1).state == RequestState::Running); // survivor untouched
}

TEST_CASE("eviction stops once the blocked request itself is the victim") {
  ClusterState c = cluster_of(1, 100);
  Scheduler s(policy());
  const RequestId r0 = add_request(c, 16, 10);
  const RequestId r1 = add_request(c, 16, 10);
  force_place(c, s, r0, 0);
  force_place(c, s, r1, 0);
  // retry never succeeds: both get evicted, newest first, then the loop
  // ends with the blocked request itself evicted.
  const auto victims = s.evict_until(c, 0, r0, [] { return false; });
  REQUIRE(victims.size() == 2);
  CHECK(victims[0] == r1);
  CHECK(victims[1] == r0);
  CHECK(c.gpus[0].working_set.empty());
}

TEST_CASE("scaling signal") {
  Scheduler s(policy(32, 16, 1));
  SUBCASE("single gpu at threshold wants more") {
    ClusterState c = cluster_of(1, 10000);
    for (int i = 0; i < 32; ++i) force_place(c, s, add_request(c, 1, 1), 0);
    const auto sig = s.scaling_signal(c);
    CHECK(sig.kind == ScalingKind::NeedMore);
  }
  SUBCASE("idle gpus are releasable") {
    ClusterState c = cluster_of(3, 10000);
    for (int i = 0; i < 32; ++i) force_place(c, s, add_request(c, 1, 1), 0);
    const auto sig = s.scaling_signal(c);
    CHECK(sig.kind == ScalingKind::CanRelease);
    REQUIRE(sig.releasable_gpus.size() == 2);
    CHECK(sig.releasable_gpus[0] == 1);
    CHECK(sig.releasable_gpus[1] == 2);
  }
  SUBCASE("mixed load is steady state") {
    ClusterState c = cluster_of(2, 10000);
    for (int i = 0; i < 32; ++i) force_place(c, s, add_request(c, 1, 1), 0);
    for (int i = 0; i < 5; ++i) force_place(c, s, add_request(c, 1, 1), 1);
    const auto sig = s.scaling_signal(c);
    CHECK(sig.kind == ScalingKind::SteadyState);
    CHECK(sig.releasable_gpus.empty());
  }
  SUBCASE("every set at or above threshold wants more") {
    ClusterState c = cluster_of(2, 10000);
    for (int i = 0; i < 16; ++i) force_place(c, s, add_request(c, 1, 1), 0);
    for (int i = 0; i < 17; ++i) force_place(c, s, add_request(c, 1, 1), 1);
    CHECK(s.scaling_signal(c).kind == ScalingKind::NeedMore);
  }
  SUBCASE("no gpus is vacuously steady") {
    ClusterState c;
    CHECK(s.scaling_signal(c).kind == ScalingKind::SteadyState);
  }
}

TEST_CASE("remove_from_gpu frees pages and the slot") {
  ClusterState c = cluster_of(1, 10);
  Scheduler s(policy());
  const RequestId r = add_request(c, 16, 10);
  force_place(c, s, r, 0);
  const int before = c.gpus[0].kv.free_pages();
  s.remove_from_gpu(c, r);
  CHECK(c.gpus[0].kv.free_pages() == before + 1);
  CHECK_FALSE(c.gpus[0].in_working_set(r));
}
