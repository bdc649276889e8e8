#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lorasim/matrix.hpp"

namespace lorasim {

using LoraId = std::int64_t;

// Row-segment boundaries s_0..s_n over a batch of token rows.
// Invariants: s_0 = 0, strictly increasing (every segment non-empty),
// s_n = total row count of the paired batch.
class Segments {
 public:
  explicit Segments(std::vector<std::size_t> boundaries);

  static Segments single(std::size_t rows);
  static Segments empty() { return Segments({0}); }

  std::size_t count() const { return boundaries_.size() - 1; }
  std::size_t total_rows() const { return boundaries_.back(); }
  std::size_t begin_of(std::size_t i) const { return boundaries_[i]; }
  std::size_t end_of(std::size_t i) const { return boundaries_[i + 1]; }
  std::size_t size_of(std::size_t i) const { return boundaries_[i + 1] - boundaries_[i]; }
  const std::vector<std::size_t>& boundaries() const { return boundaries_; }

  bool operator==(const Segments& o) const { return boundaries_ == o.boundaries_; }

 private:
  std::vector<std::size_t> boundaries_;
};

// One adapter: A maps h_in -> rank, B maps rank -> h_out.
// Invariants: 1 <= rank <= min(h_in, h_out), all entries finite.
struct LoraModel {
  LoraModel(LoraId id, Matrix a, Matrix b);

  std::size_t rank() const { return a.cols(); }
  std::size_t h_in() const { return a.rows(); }
  std::size_t h_out() const { return b.cols(); }

  LoraId id;
  Matrix a;
  Matrix b;
};

// A batch of token rows grouped into contiguous per-adapter segments.
// x has segments.total_rows() rows; models has segments.count() entries,
// models[i] applying to rows [s_i, s_{i+1}).
struct Batch {
  Batch(Matrix x, Segments segments, std::vector<LoraModel> models);

  std::size_t rows() const { return segments.total_rows(); }
  std::size_t h_in() const { return x.cols(); }

  Matrix x;
  Segments segments;
  std::vector<LoraModel> models;
};

// Segmented shrink: v[j] = x[j] * A_{seg(j)}, output s_n x r.
// All models must share rank and input dimension; heterogeneous ranks are an error.
Matrix sgmv_shrink(const Batch& batch);

// Segmented expand: y[j] = v[j] * B_{seg(j)}, output s_n x h_out.
Matrix sgmv_expand(const Matrix& v, const Segments& segments,
                   const std::vector<LoraModel>& models);

// Composition expand(shrink(batch)): the full batched LoRA add-on term.
Matrix lora_addon(const Batch& batch);

// x * w + lora_addon(batch); w is the shared dense backbone weight (h_in x h_out).
Matrix dense_projection(const Batch& batch, const Matrix& w);

// Oracle 1: per-segment dense loop. Independent loop nest from the segmented ops.
Matrix lora_loop_oracle(const Batch& batch);

// Oracle 2: gathers per-row copies of A and B, then does row-wise products.
// Models the gather + batched-matmul formulation, including its weight duplication.
Matrix gather_bmm_oracle(const Batch& batch);

}  // namespace lorasim
