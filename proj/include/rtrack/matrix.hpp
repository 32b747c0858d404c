// include/rtrack/matrix.hpp

// Copyright 2026  rtrack authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RTRACK_MATRIX_HPP_
#define RTRACK_MATRIX_HPP_

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rtrack {

// Dense row-major matrix of doubles. Desk-scale sizes only.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double &at(int r, int c) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return data[static_cast<size_t>(r) * cols + c];
  }
  double at(int r, int c) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return data[static_cast<size_t>(r) * cols + c];
  }
  const double *row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double *row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Matrix &o) const { return rows == o.rows && cols == o.cols; }

  Matrix row(int r) const {
    Matrix out(1, cols);
    for (int c = 0; c < cols; ++c) out.at(0, c) = at(r, c);
    return out;
  }

  void set_row(int r, const Matrix &v) {
    assert(v.rows == 1 && v.cols == cols);
    for (int c = 0; c < cols; ++c) at(r, c) = v.at(0, c);
  }

  bool all_finite() const {
    // NaN and inf both poison the sum, so one reduction suffices.
    double s = 0.0;
    for (double x : data) s += x;
    return std::isfinite(s);
  }
};

inline Matrix matmul(const Matrix &a, const Matrix &b) {
  assert(a.cols == b.rows);
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double *brow = b.row_ptr(k);
      double *orow = out.row_ptr(i);
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix &a) {
  Matrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline Matrix add(const Matrix &a, const Matrix &b) {
  assert(a.same_shape(b));
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Matrix concat_cols(const Matrix &a, const Matrix &b) {
  assert(a.rows == b.rows);
  Matrix out(a.rows, a.cols + b.cols);
  for (int r = 0; r < a.rows; ++r) {
    for (int c = 0; c < a.cols; ++c) out.at(r, c) = a.at(r, c);
    for (int c = 0; c < b.cols; ++c) out.at(r, a.cols + c) = b.at(r, c);
  }
  return out;
}

inline double max_abs_diff(const Matrix &a, const Matrix &b) {
  assert(a.same_shape(b));
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = std::fabs(a.data[i] - b.data[i]);
    if (d > m) m = d;
  }
  return m;
}

// Numerically stable softmax of a length-n array, in place.
inline void softmax_inplace(double *x, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    s += x[i];
  }
  for (int i = 0; i < n; ++i) x[i] /= s;
}

inline double logsumexp(const double *x, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  if (!std::isfinite(mx)) return mx;  // all -inf
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

}  // namespace rtrack

#endif  // RTRACK_MATRIX_HPP_
