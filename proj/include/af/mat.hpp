#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <memory>
#include <span>

namespace af {

struct Uninit {};
inline constexpr Uninit kUninit{};

// Dense row-major matrix of doubles. Rows are contiguous, so per-sample work
// (one sample per row) runs on contiguous spans. The kUninit constructor
// skips zero-filling for buffers that get fully overwritten.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols)
      : rows_(rows),
        cols_(cols),
        size_(static_cast<std::size_t>(rows) * cols),
        data_(new double[size_]()) {}
  Mat(int rows, int cols, Uninit)
      : rows_(rows),
        cols_(cols),
        size_(static_cast<std::size_t>(rows) * cols),
        data_(new double[size_]) {}

  Mat(const Mat& other)
      : rows_(other.rows_), cols_(other.cols_), size_(other.size_) {
    if (size_ > 0) {
      data_.reset(new double[size_]);
      std::memcpy(data_.get(), other.data_.get(), size_ * sizeof(double));
    }
  }
  Mat& operator=(const Mat& other) {
    if (this != &other) {
      if (size_ != other.size_) {
        data_.reset(other.size_ > 0 ? new double[other.size_] : nullptr);
      }
      rows_ = other.rows_;
      cols_ = other.cols_;
      size_ = other.size_;
      if (size_ > 0) std::memcpy(data_.get(), other.data_.get(), size_ * sizeof(double));
    }
    return *this;
  }
  Mat(Mat&&) noexcept = default;
  Mat& operator=(Mat&&) noexcept = default;

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }

  double* row(int i) { return data_.get() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const {
    return data_.get() + static_cast<std::size_t>(i) * cols_;
  }
  std::span<double> row_span(int i) { return {row(i), static_cast<std::size_t>(cols_)}; }
  std::span<const double> row_span(int i) const {
    return {row(i), static_cast<std::size_t>(cols_)};
  }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  void set_zero() { std::memset(data_.get(), 0, size_ * sizeof(double)); }

  bool same_shape(const Mat& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size_; ++i) acc += data_[i];
    return std::isfinite(acc);
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::size_t size_ = 0;
  std::unique_ptr<double[]> data_;
};

// Reductions use four fixed lanes so the compiler can vectorize them; the
// summation order is part of the function's definition and never varies.
inline double dot(const double* a, const double* b, int n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  double acc = (l0 + l1) + (l2 + l3);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double sq_dist(const double* a, const double* b, int n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = a[i] - b[i];
    const double d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2];
    const double d3 = a[i + 3] - b[i + 3];
    l0 += d0 * d0;
    l1 += d1 * d1;
    l2 += d2 * d2;
    l3 += d3 * d3;
  }
  double acc = (l0 + l1) + (l2 + l3);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

inline double sq_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

}  // namespace af
