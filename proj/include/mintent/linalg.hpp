#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mintent {

using ItemId = std::int64_t;
using UserId = std::int64_t;

// Dense row-major matrix. Intent banks store one intent per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void append_row(std::span<const double> values) {
    assert(rows_ == 0 || values.size() == cols_);
    if (rows_ == 0) cols_ = values.size();
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void erase_row(std::size_t r) {
    data_.erase(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
    --rows_;
  }

  void set_shape(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, 0.0);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// y = M x for row-major M (rows x cols), x of length cols.
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
}

// y += M^T x for row-major M, x of length rows.
inline void matvec_t_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(x[r], m.row(r), y);
}

// M += alpha * a b^T
inline void outer_add(double alpha, std::span<const double> a, std::span<const double> b, Matrix& m) {
  for (std::size_t r = 0; r < a.size(); ++r) axpy(alpha * a[r], b, m.row(r));
}

// In-place max-subtracted softmax.
inline void softmax_inplace(std::span<double> x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

inline double logsumexp(std::span<const double> x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Values that survive a round trip through float32 storage unchanged.
inline double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

inline void round_to_float(std::span<double> values) {
  for (double& v : values) v = to_float_precision(v);
}

}  // namespace mintent
