#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tvgnn/common.hpp"

namespace tvgnn {

// Row-major dense matrix of 64-bit floats. Scalars are 1x1.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
    require(r >= 0 && c >= 0, "DenseMatrix: negative dimension");
  }

  static DenseMatrix zeros(int r, int c) { return DenseMatrix(r, c); }

  static DenseMatrix full(int r, int c, double value) {
    DenseMatrix m(r, c);
    for (auto& x : m.v) x = value;
    return m;
  }

  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.v[static_cast<size_t>(i) * n + i] = 1.0;
    return m;
  }

  static DenseMatrix scalar(double value) { return full(1, 1, value); }

  double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

  double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }

  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

  bool is_scalar() const { return rows == 1 && cols == 1; }
  double scalar_value() const {
    require(is_scalar(), "scalar_value: matrix is " + shape_str(rows, cols));
    return v[0];
  }
};

inline bool all_finite(const DenseMatrix& m) {
  for (double x : m.v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.v.size(); ++i)
    if (a.v[i] != b.v[i]) return false;
  return true;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "max_abs_diff: shapes " + shape_str(a.rows, a.cols) +
                               " vs " + shape_str(b.rows, b.cols));
  double d = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

// out = a * b
inline void matmul_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require(a.cols == b.rows, "matmul: inner dimensions disagree, " +
                                shape_str(a.rows, a.cols) + " * " + shape_str(b.rows, b.cols));
  out = DenseMatrix(a.rows, b.cols);
  const int n = a.rows, k = a.cols, c = b.cols;
  for (int i = 0; i < n; ++i) {
    double* oi = out.row(i);
    const double* ai = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.row(p);
      for (int j = 0; j < c; ++j) oi[j] += aip * bp[j];
    }
  }
}

// out += g * b^T   (rows of g against rows of b)
inline void accum_a_bt(const DenseMatrix& g, const DenseMatrix& b, DenseMatrix& out) {
  const int n = g.rows, c = g.cols, k = b.rows;
  for (int i = 0; i < n; ++i) {
    const double* gi = g.row(i);
    double* oi = out.row(i);
    for (int p = 0; p < k; ++p) {
      const double* bp = b.row(p);
      double acc = 0.0;
      for (int j = 0; j < c; ++j) acc += gi[j] * bp[j];
      oi[p] += acc;
    }
  }
}

// out += a^T * g
inline void accum_at_b(const DenseMatrix& a, const DenseMatrix& g, DenseMatrix& out) {
  const int n = a.rows, k = a.cols, c = g.cols;
  for (int i = 0; i < n; ++i) {
    const double* ai = a.row(i);
    const double* gi = g.row(i);
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* op = out.row(p);
      for (int j = 0; j < c; ++j) op[j] += aip * gi[j];
    }
  }
}

}  // namespace tvgnn
