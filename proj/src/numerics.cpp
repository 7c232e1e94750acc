#include "tct/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace tct {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::col_block(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw ShapeError("column block out of range");
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy_n(data_.data() + r * cols_ + first, count, out.data_.data() + r * count);
  }
  return out;
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) throw ShapeError("row block out of range");
  Matrix out(count, cols_);
  std::copy_n(data_.data() + first * cols_, count * cols_, out.data_.data());
  return out;
}

Matrix Matrix::transposed() const {
  Matrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && bitwise_equal(a.values(), b.values());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix c(n, m);
  // i-k-j order: each c[i][j] still sees k in ascending order.
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_transposed: inner dimensions " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()));
  }
  const std::size_t n = a.rows(), m = b.rows(), inner = a.cols();
  Matrix c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix softmax_rows(const Matrix& m, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("softmax_rows: scale must be positive");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto dst = out.row(r);
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : in) peak = std::max(peak, v * scale);
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] * scale - peak);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

Matrix keeptop_rows(const Matrix& m) {
  if (m.empty()) throw ShapeError("keeptop_rows: empty matrix");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) out(r, argmax(m.row(r))) = 1.0;
  return out;
}

Matrix layernorm_rows(const Matrix& m, std::span<const double> gain, std::span<const double> bias,
                      double eps) {
  if (gain.size() != m.cols() || bias.size() != m.cols()) {
    throw ShapeError("layernorm_rows: gain/bias length must equal column count");
  }
  Matrix out(m.rows(), m.cols());
  const double n = static_cast<double>(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) dst[c] = (in[c] - mean) * inv * gain[c] + bias[c];
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

void add_row_bias(Matrix& m, std::span<const double> bias) {
  if (bias.empty()) return;
  if (bias.size() != m.cols()) throw ShapeError("bias length must equal column count");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("argmax of empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace tct
