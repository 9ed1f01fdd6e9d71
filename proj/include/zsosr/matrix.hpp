#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace zsosr::nd {

/// Dense row-major float32 matrix. Parameters and activations live here;
/// loss and metric accumulation happens in double at the call sites.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);

  static Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool all_finite() const;

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// C = A (n×k) · B (k×m). Dot products accumulate in double.
Matrix matmul(const Matrix& a, const Matrix& b);
/// C = A (n×k) · Bᵀ with B (m×k).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// C = Aᵀ (k×n) · B with A (n×k), B (n×m).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Adds a 1×m bias row to every row of m (n×m).
void add_row_inplace(Matrix& m, const Matrix& bias);
/// Column sums of m as a 1×m matrix (double accumulation).
Matrix column_sums(const Matrix& m);

/// Horizontal concatenation [a | b]; row counts must match.
Matrix hconcat(const Matrix& a, const Matrix& b);
/// Vertical concatenation; column counts must match.
Matrix vconcat(const Matrix& a, const Matrix& b);
/// Copy of columns [begin, end) of m.
Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t end);
/// Copy of the listed rows of m, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::uint32_t> rows);

double squared_distance(std::span<const float> a, std::span<const float> b);
double euclidean_distance(std::span<const float> a, std::span<const float> b);

}  // namespace zsosr::nd
