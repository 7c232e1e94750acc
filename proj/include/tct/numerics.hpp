#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tct {

/// Raised when operand shapes do not agree (matrix products, patch grids,
/// tensor tables). Maps to CLI exit code 1.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// Copies columns [first, first + count) into a new rows() x count matrix.
  Matrix col_block(std::size_t first, std::size_t count) const;
  /// Copies rows [first, first + count).
  Matrix row_block(std::size_t first, std::size_t count) const;

  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// True when both matrices have the same shape and identical bit patterns.
bool bitwise_equal(const Matrix& a, const Matrix& b);
bool bitwise_equal(std::span<const double> a, std::span<const double> b);

/// Standard product. Each output entry accumulates a[i][k] * b[k][j] for
/// k = 0, 1, ... starting from +0.0, so results match a naive triple loop bit
/// for bit.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T with the same accumulation order as matmul.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

/// Row-wise softmax of (scale * m), with per-row max subtraction.
Matrix softmax_rows(const Matrix& m, double scale);

/// Binary matrix with a single 1 per row at the row argmax (lowest column
/// wins ties).
Matrix keeptop_rows(const Matrix& m);

/// Per-row layer normalization (population variance) followed by an affine
/// gain/bias.
Matrix layernorm_rows(const Matrix& m, std::span<const double> gain, std::span<const double> bias,
                      double eps);

/// Gaussian error linear unit, exact erf form.
double gelu(double x);

/// Adds bias[j] to every row's column j. No-op for an empty bias.
void add_row_bias(Matrix& m, std::span<const double> bias);

/// Lowest index of the maximum; size must be non-zero.
std::size_t argmax(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace tct
