#include "lorasim/kv_cache.hpp"

#include <stdexcept>

namespace lorasim {

KvCacheAllocator::KvCacheAllocator(KvPageConfig cfg) : cfg_(cfg) {
  if (cfg_.page_size < 1) throw std::invalid_argument("KvCacheAllocator: page_size < 1");
  if (cfg_.total_pages < 0) throw std::invalid_argument("KvCacheAllocator: negative total_pages");
  free_.reserve(static_cast<std::size_t>(cfg_.total_pages));
  // Stack order makes allocation deterministic: lowest ids leave last.
  for (int p = cfg_.total_pages - 1; p >= 0; --p) free_.push_back(p);
}

int KvCacheAllocator::pages_for(int tokens, int page_size) {
  if (tokens <= 0) return 0;
  return (tokens + page_size - 1) / page_size;
}

bool KvCacheAllocator::reserve(RequestId id, int initial_tokens) {
  if (held_.count(id)) throw std::invalid_argument("KvCacheAllocator: id already reserved");
  if (initial_tokens < 0) throw std::invalid_argument("KvCacheAllocator: negative length");
  const int need = pages_for(initial_tokens, cfg_.page_size);
  if (need > free_pages()) return false;
  Holding h;
  h.seq_len = initial_tokens;
  h.pages.reserve(static_cast<std::size_t>(need));
  for (int i = 0; i < need; ++i) {
    h.pages.push_back(free_.back());
    free_.pop_back();
  }
  held_.emplace(id, std::move(h));
  return true;
}

bool KvCacheAllocator::extend(RequestId id, int new_tokens) {
  auto it = held_.find(id);
  if (it == held_.end()) throw std::invalid_argument("KvCacheAllocator: extend of unknown id");
  if (new_tokens < 0) throw std::invalid_argument("KvCacheAllocator: negative extension");
  Holding& h = it->second;
  const int target = h.seq_len + new_tokens;
  const int need = pages_for(target, cfg_.page_size) - static_cast<int>(h.pages.size());
  if (need > free_pages()) return false;
  for (int i = 0; i < need; ++i) {
    h.pages.push_back(free_.back());
    free_.pop_back();
  }
  h.seq_len = target;
  return true;
}

int KvCacheAllocator::release(RequestId id) {
  auto it = held_.find(id);
  if (it == held_.end()) throw std::invalid_argument("KvCacheAllocator: release of unknown id");
  const int freed = static_cast<int>(it->second.pages.size());
  for (int p : it->second.pages) free_.push_back(p);
  held_.erase(it);
  return freed;
}

bool KvCacheAllocator::can_admit(int prompt_tokens, int headroom_pages) const {
  return pages_for(prompt_tokens, cfg_.page_size) + headroom_pages <= free_pages();
}

int KvCacheAllocator::seq_len(RequestId id) const {
  auto it = held_.find(id);
  if (it == held_.end()) throw std::invalid_argument("KvCacheAllocator: unknown id");
  return it->second.seq_len;
}

int KvCacheAllocator::pages_held(RequestId id) const {
  auto it = held_.find(id);
  if (it == held_.end()) return 0;
  return static_cast<int>(it->second.pages.size());
}

const std::vector<int>& KvCacheAllocator::page_ids(RequestId id) const {
  auto it = held_.find(id);
  if (it == held_.end()) throw std::invalid_argument("KvCacheAllocator: unknown id");
  return it->second.pages;
}

std::vector<RequestId> KvCacheAllocator::holders() const {
  std::vector<RequestId> out;
  out.reserve(held_.size());
  for (const auto& [id, h] : held_) out.push_back(id);
  return out;
}

}  // namespace lorasim
