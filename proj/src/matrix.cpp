#include "zsosr/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace zsosr::nd {

namespace {

[[noreturn]] void shape_error(const char* op, std::size_t ar, std::size_t ac,
                              std::size_t br, std::size_t bc) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              std::to_string(ar) + "x" + std::to_string(ac) +
                              " and " + std::to_string(br) + "x" +
                              std::to_string(bc));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  Matrix m;
  m.rows_ = rows.size();
  m.cols_ = rows.size() ? rows.begin()->size() : 0;
  m.data_.reserve(m.rows_ * m.cols_);
  for (const auto& r : rows) {
    if (r.size() != m.cols_) {
      throw std::invalid_argument("Matrix::from_rows: ragged rows");
    }
    m.data_.insert(m.data_.end(), r.begin(), r.end());
  }
  return m;
}

bool Matrix::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const float* arow = a.data() + i * a.cols();
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const float* brow = b.data() + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) {
        acc[j] += aik * brow[j];
      }
    }
    float* crow = c.data() + i * c.cols();
    for (std::size_t j = 0; j < b.cols(); ++j) crow[j] = static_cast<float>(acc[j]);
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const float* arow = a.data() + i * a.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const float* brow = b.data() + j * b.cols();
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(arow[k]) * brow[k];
      }
      c.at(i, j) = static_cast<float>(acc);
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a.rows(), a.cols(), b.rows(), b.cols());
  // Accumulate each output entry in double before narrowing.
  std::vector<double> acc(a.cols() * b.cols(), 0.0);
  for (std::size_t n = 0; n < a.rows(); ++n) {
    const float* arow = a.data() + n * a.cols();
    const float* brow = b.data() + n * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ani = arow[i];
      if (ani == 0.0) continue;
      double* out = acc.data() + i * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out[j] += ani * brow[j];
      }
    }
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = static_cast<float>(acc[i]);
  return c;
}

void add_row_inplace(Matrix& m, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    shape_error("add_row_inplace", m.rows(), m.cols(), bias.rows(), bias.cols());
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    float* row = m.data() + i * m.cols();
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += bias.data()[j];
  }
}

Matrix column_sums(const Matrix& m) {
  std::vector<double> acc(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float* row = m.data() + i * m.cols();
    for (std::size_t j = 0; j < m.cols(); ++j) acc[j] += row[j];
  }
  Matrix out(1, m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) out.data()[j] = static_cast<float>(acc[j]);
  return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("hconcat", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    float* crow = c.data() + i * c.cols();
    const float* arow = a.data() + i * a.cols();
    const float* brow = b.data() + i * b.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) crow[j] = arow[j];
    for (std::size_t j = 0; j < b.cols(); ++j) crow[a.cols() + j] = brow[j];
  }
  return c;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols()) shape_error("vconcat", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix c(a.rows() + b.rows(), a.cols());
  std::copy(a.data(), a.data() + a.size(), c.data());
  std::copy(b.data(), b.data() + b.size(), c.data() + a.size());
  return c;
}

Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t end) {
  if (begin > end || end > m.cols()) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) +
                                ", " + std::to_string(end) + ") out of " +
                                std::to_string(m.cols()) + " columns");
  }
  Matrix out(m.rows(), end - begin);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float* src = m.data() + i * m.cols() + begin;
    std::copy(src, src + out.cols(), out.data() + i * out.cols());
  }
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::uint32_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) +
                              " out of " + std::to_string(m.rows()));
    }
    const float* src = m.data() + static_cast<std::size_t>(rows[i]) * m.cols();
    std::copy(src, src + m.cols(), out.data() + i * m.cols());
  }
  return out;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("squared_distance: dims " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace zsosr::nd
