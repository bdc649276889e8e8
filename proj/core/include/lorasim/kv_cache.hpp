#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

namespace lorasim {

using RequestId = int;

// Paged attention-cache geometry. Layout per page:
// [page_size, layers, 2 (K and V), kv_heads, head_dim] elements.
struct KvPageConfig {
  int page_size = 16;
  int layers = 32;
  int kv_heads = 32;
  int head_dim = 128;
  int elem_bytes = 2;
  int total_pages = 0;

  std::size_t bytes_per_page() const {
    return static_cast<std::size_t>(page_size) * layers * 2 * kv_heads * head_dim * elem_bytes;
  }
};

// Page-granular allocator. A request holding S tokens holds exactly
// ceil(S / page_size) pages; page sets of live requests are disjoint and
// free + sum(held) == total_pages at all times.
class KvCacheAllocator {
 public:
  explicit KvCacheAllocator(KvPageConfig cfg);

  static int pages_for(int tokens, int page_size);

  // Allocates pages for a request's initial sequence (its prefill length).
  // Returns false (no state change) if pages are unavailable.
  // A request id may not be reserved twice.
  bool reserve(RequestId id, int initial_tokens);

  // Grows a held sequence by new_tokens, allocating pages only when a page
  // boundary is crossed. Returns false (no state change) on exhaustion.
  bool extend(RequestId id, int new_tokens);

  // Frees all pages of a request; returns the page count freed.
  int release(RequestId id);

  // True when a prompt of prompt_tokens plus headroom_pages spare pages fits.
  bool can_admit(int prompt_tokens, int headroom_pages) const;

  bool holds(RequestId id) const { return held_.count(id) != 0; }
  int seq_len(RequestId id) const;
  int pages_held(RequestId id) const;
  const std::vector<int>& page_ids(RequestId id) const;
  std::vector<RequestId> holders() const;  // ascending id

  int free_pages() const { return static_cast<int>(free_.size()); }
  int total_pages() const { return cfg_.total_pages; }
  const KvPageConfig& config() const { return cfg_; }

 private:
  struct Holding {
    int seq_len = 0;
    std::vector<int> pages;
  };

  KvPageConfig cfg_;
  std::vector<int> free_;  // stack of free page ids
  std::map<RequestId, Holding> held_;
};

}  // namespace lorasim
