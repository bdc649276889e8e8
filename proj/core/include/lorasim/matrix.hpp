#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lorasim {

// Dense row-major matrix of 64-bit reals. Deliberately minimal: the batched
// LoRA operators and their oracles each implement their own loop nests so the
// implementations under test share no numerical code.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  double at(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw std::out_of_range("Matrix::at: index out of range");
    return data_[r * cols_ + c];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Plain triple-loop product, used only for the dense backbone path.
Matrix matmul(const Matrix& a, const Matrix& b);

// Largest elementwise absolute difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace lorasim
