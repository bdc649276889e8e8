#include "lorasim/sgmv.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lorasim {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = std::fabs(a.data()[i] - b.data()[i]);
    if (d > worst) worst = d;
  }
  return worst;
}

Segments::Segments(std::vector<std::size_t> boundaries) : boundaries_(std::move(boundaries)) {
  if (boundaries_.empty()) throw std::invalid_argument("Segments: boundary list empty");
  if (boundaries_.front() != 0) throw std::invalid_argument("Segments: s_0 must be 0");
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (boundaries_[i] <= boundaries_[i - 1])
      throw std::invalid_argument("Segments: boundaries must be strictly increasing");
  }
}

Segments Segments::single(std::size_t rows) {
  if (rows == 0) return Segments({0});
  return Segments({0, rows});
}

LoraModel::LoraModel(LoraId id_, Matrix a_, Matrix b_)
    : id(id_), a(std::move(a_)), b(std::move(b_)) {
  const std::size_t r = a.cols();
  if (r == 0) throw std::invalid_argument("LoraModel: rank must be >= 1");
  if (b.rows() != r) throw std::invalid_argument("LoraModel: A columns != B rows");
  if (r > a.rows() || r > b.cols())
    throw std::invalid_argument("LoraModel: rank exceeds min(h_in, h_out)");
  for (double v : a.data())
    if (!std::isfinite(v)) throw std::invalid_argument("LoraModel: non-finite entry in A");
  for (double v : b.data())
    if (!std::isfinite(v)) throw std::invalid_argument("LoraModel: non-finite entry in B");
}

Batch::Batch(Matrix x_, Segments segments_, std::vector<LoraModel> models_)
    : x(std::move(x_)), segments(std::move(segments_)), models(std::move(models_)) {
  if (x.rows() != segments.total_rows())
    throw std::invalid_argument("Batch: x row count != segment total");
  if (models.size() != segments.count())
    throw std::invalid_argument("Batch: model count != segment count");
}

namespace {

struct SharedDims {
  std::size_t rank;
  std::size_t h_in;
};

// Homogeneous rank and input dim across the batch; heterogeneous ranks rejected.
SharedDims check_shrink_dims(const Batch& batch) {
  if (batch.models.empty()) return {0, batch.x.cols()};
  const std::size_t r = batch.models.front().rank();
  for (const auto& m : batch.models) {
    if (m.rank() != r)
      throw std::invalid_argument("sgmv: heterogeneous adapter ranks in one batch");
    if (m.h_in() != batch.x.cols())
      throw std::invalid_argument("sgmv: adapter input dim != batch hidden dim");
  }
  return {r, batch.x.cols()};
}

std::size_t check_expand_dims(const Matrix& v, const Segments& segments,
                              const std::vector<LoraModel>& models) {
  if (v.rows() != segments.total_rows())
    throw std::invalid_argument("sgmv_expand: v row count != segment total");
  if (models.size() != segments.count())
    throw std::invalid_argument("sgmv_expand: model count != segment count");
  if (models.empty()) return 0;
  const std::size_t h_out = models.front().h_out();
  for (const auto& m : models) {
    if (m.rank() != v.cols())
      throw std::invalid_argument("sgmv_expand: adapter rank != v column count");
    if (m.h_out() != h_out)
      throw std::invalid_argument("sgmv_expand: adapters disagree on output dim");
  }
  return h_out;
}

}  // namespace

Matrix sgmv_shrink(const Batch& batch) {
  const SharedDims dims = check_shrink_dims(batch);
  Matrix v(batch.rows(), dims.rank);
  for (std::size_t s = 0; s < batch.segments.count(); ++s) {
    const Matrix& a = batch.models[s].a;
    for (std::size_t j = batch.segments.begin_of(s); j < batch.segments.end_of(s); ++j) {
      for (std::size_t k = 0; k < dims.rank; ++k) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dims.h_in; ++d) acc += batch.x(j, d) * a(d, k);
        v(j, k) = acc;
      }
    }
  }
  return v;
}

Matrix sgmv_expand(const Matrix& v, const Segments& segments,
                   const std::vector<LoraModel>& models) {
  const std::size_t h_out = check_expand_dims(v, segments, models);
  Matrix y(v.rows(), h_out);
  for (std::size_t s = 0; s < segments.count(); ++s) {
    const Matrix& b = models[s].b;
    for (std::size_t j = segments.begin_of(s); j < segments.end_of(s); ++j) {
      for (std::size_t c = 0; c < h_out; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < v.cols(); ++k) acc += v(j, k) * b(k, c);
        y(j, c) = acc;
      }
    }
  }
  return y;
}

Matrix lora_addon(const Batch& batch) {
  if (batch.models.empty()) return Matrix(0, 0);
  return sgmv_expand(sgmv_shrink(batch), batch.segments, batch.models);
}

Matrix dense_projection(const Batch& batch, const Matrix& w) {
  if (w.rows() != batch.x.cols())
    throw std::invalid_argument("dense_projection: w rows != batch hidden dim");
  for (const auto& m : batch.models) {
    if (m.h_out() != w.cols())
      throw std::invalid_argument("dense_projection: adapter output dim != w columns");
  }
  if (batch.rows() == 0) return Matrix(0, w.cols());
  Matrix y = matmul(batch.x, w);
  const Matrix addon = lora_addon(batch);
  for (std::size_t i = 0; i < y.data().size(); ++i) y.data()[i] += addon.data()[i];
  return y;
}

Matrix lora_loop_oracle(const Batch& batch) {
  const SharedDims dims = check_shrink_dims(batch);
  if (batch.models.empty()) return Matrix(0, 0);
  const std::size_t h_out = batch.models.front().h_out();
  for (const auto& m : batch.models) {
    if (m.h_out() != h_out)
      throw std::invalid_argument("lora_loop_oracle: adapters disagree on output dim");
  }
  Matrix y(batch.rows(), h_out);
  std::vector<double> tmp(dims.rank);
  for (std::size_t s = 0; s < batch.segments.count(); ++s) {
    const LoraModel& m = batch.models[s];
    for (std::size_t j = batch.segments.begin_of(s); j < batch.segments.end_of(s); ++j) {
      // Accumulation runs d-major here, unlike the k-major segmented kernel.
      for (std::size_t k = 0; k < dims.rank; ++k) tmp[k] = 0.0;
      for (std::size_t d = 0; d < dims.h_in; ++d) {
        const double xd = batch.x(j, d);
        for (std::size_t k = 0; k < dims.rank; ++k) tmp[k] += xd * m.a(d, k);
      }
      for (std::size_t c = 0; c < h_out; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dims.rank; ++k) acc += tmp[k] * m.b(k, c);
        y(j, c) = acc;
      }
    }
  }
  return y;
}

Matrix gather_bmm_oracle(const Batch& batch) {
  const SharedDims dims = check_shrink_dims(batch);
  if (batch.models.empty()) return Matrix(0, 0);
  const std::size_t h_out = batch.models.front().h_out();
  for (const auto& m : batch.models) {
    if (m.h_out() != h_out)
      throw std::invalid_argument("gather_bmm_oracle: adapters disagree on output dim");
  }
  const std::size_t rows = batch.rows();
  // Gather step: duplicate each row's adapter weights into per-row buffers.
  std::vector<Matrix> a_rows(rows);
  std::vector<Matrix> b_rows(rows);
  for (std::size_t s = 0; s < batch.segments.count(); ++s) {
    for (std::size_t j = batch.segments.begin_of(s); j < batch.segments.end_of(s); ++j) {
      a_rows[j] = batch.models[s].a;
      b_rows[j] = batch.models[s].b;
    }
  }
  // Batched matmul step: each row against its own gathered weights.
  Matrix y(rows, h_out);
  for (std::size_t j = 0; j < rows; ++j) {
    std::vector<double> v(dims.rank, 0.0);
    for (std::size_t k = 0; k < dims.rank; ++k)
      for (std::size_t d = 0; d < dims.h_in; ++d) v[k] += batch.x(j, d) * a_rows[j](d, k);
    for (std::size_t c = 0; c < h_out; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dims.rank; ++k) acc += v[k] * b_rows[j](k, c);
      y(j, c) = acc;
    }
  }
  return y;
}

}  // namespace lorasim
