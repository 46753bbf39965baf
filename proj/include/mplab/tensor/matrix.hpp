#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab::nn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void check_finite(std::span<const double> xs, const char* what) {
  if (!all_finite(xs)) throw NumericError(std::string("non-finite value in ") + what);
}

inline void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                     std::to_string(got));
}

/// y = W x + b
inline void affine(const Matrix& w, std::span<const double> x, std::span<const double> b,
                   std::span<double> y) {
  const std::size_t n = w.cols();
  const double* xp = x.data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row(r).data();
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
      a0 += wr[c] * xp[c];
      a1 += wr[c + 1] * xp[c + 1];
      a2 += wr[c + 2] * xp[c + 2];
      a3 += wr[c + 3] * xp[c + 3];
    }
    for (; c < n; ++c) a0 += wr[c] * xp[c];
    y[r] = b[r] + ((a0 + a1) + (a2 + a3));
  }
}

/// dx += W^T dy
inline void accumulate_transpose_product(const Matrix& w, std::span<const double> dy,
                                         std::span<double> dx) {
  const std::size_t n = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    const double* wr = w.row(r).data();
    for (std::size_t c = 0; c < n; ++c) dx[c] += wr[c] * d;
  }
}

/// dW += dy x^T
inline void accumulate_outer(Matrix& dw, std::span<const double> dy, std::span<const double> x) {
  const std::size_t n = dw.cols();
  auto values = dw.values();
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    double* row = values.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) row[c] += d * x[c];
  }
}

inline Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Mutable view of one parameter tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<double> value;
  std::span<double> grad;
};

using ParamList = std::vector<ParamRef>;

inline std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

inline void zero_grads(ParamList& params) {
  for (auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

}  // namespace mplab::nn
