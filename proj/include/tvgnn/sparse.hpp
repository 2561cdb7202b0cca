#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "tvgnn/common.hpp"
#include "tvgnn/dense.hpp"

namespace tvgnn {

// CSR matrix in canonical form: row_ptr monotone, column indices strictly
// increasing within each row. Sparse matrices are constants everywhere in
// this library; they never carry gradients.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // length rows+1
  std::vector<int> col_idx;  // length nnz
  std::vector<double> values;

  SparseMatrix() : row_ptr(1, 0) {}
  SparseMatrix(int r, int c) : rows(r), cols(c), row_ptr(static_cast<size_t>(r) + 1, 0) {}

  int nnz() const { return static_cast<int>(col_idx.size()); }

  static SparseMatrix identity(int n) {
    SparseMatrix s(n, n);
    s.col_idx.resize(n);
    s.values.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
      s.col_idx[i] = i;
      s.row_ptr[i + 1] = i + 1;
    }
    return s;
  }

  // Builds canonical CSR from (row, col, value) triplets. Duplicate
  // coordinates are summed.
  static SparseMatrix from_triplets(int rows, int cols,
                                    std::vector<std::tuple<int, int, double>> t) {
    SparseMatrix s(rows, cols);
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) <
             std::tie(std::get<0>(b), std::get<1>(b));
    });
    s.col_idx.reserve(t.size());
    s.values.reserve(t.size());
    int prev_r = -1, prev_c = -1;
    for (const auto& [r, c, x] : t) {
      require(r >= 0 && r < rows && c >= 0 && c < cols,
              "from_triplets: entry (" + std::to_string(r) + "," + std::to_string(c) +
                  ") outside " + shape_str(rows, cols));
      if (r == prev_r && c == prev_c) {
        s.values.back() += x;
        continue;
      }
      s.col_idx.push_back(c);
      s.values.push_back(x);
      s.row_ptr[static_cast<size_t>(r) + 1]++;
      prev_r = r;
      prev_c = c;
    }
    for (int r = 0; r < rows; ++r) s.row_ptr[static_cast<size_t>(r) + 1] += s.row_ptr[r];
    return s;
  }

  double get(int r, int c) const {
    const int* begin = col_idx.data() + row_ptr[r];
    const int* end = col_idx.data() + row_ptr[static_cast<size_t>(r) + 1];
    const int* it = std::lower_bound(begin, end, c);
    if (it != end && *it == c) return values[it - col_idx.data()];
    return 0.0;
  }

  bool has_entry(int r, int c) const {
    const int* begin = col_idx.data() + row_ptr[r];
    const int* end = col_idx.data() + row_ptr[static_cast<size_t>(r) + 1];
    return std::binary_search(begin, end, c);
  }

  bool is_symmetric(double tol = 0.0) const {
    if (rows != cols) return false;
    for (int i = 0; i < rows; ++i)
      for (int e = row_ptr[i]; e < row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        int j = col_idx[e];
        double mirrored = get(j, i);
        if (std::abs(mirrored - values[e]) > tol) return false;
      }
    return true;
  }

  SparseMatrix transpose() const {
    std::vector<std::tuple<int, int, double>> t;
    t.reserve(col_idx.size());
    for (int i = 0; i < rows; ++i)
      for (int e = row_ptr[i]; e < row_ptr[static_cast<size_t>(i) + 1]; ++e)
        t.emplace_back(col_idx[e], i, values[e]);
    return from_triplets(cols, rows, std::move(t));
  }

  // out = this * b
  void multiply_into(const DenseMatrix& b, DenseMatrix& out) const {
    require(cols == b.rows, "spmm: inner dimensions disagree, " + shape_str(rows, cols) +
                                " * " + shape_str(b.rows, b.cols));
    out = DenseMatrix(rows, b.cols);
    const int c = b.cols;
    for (int i = 0; i < rows; ++i) {
      double* oi = out.row(i);
      for (int e = row_ptr[i]; e < row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        const double w = values[e];
        const double* bj = b.row(col_idx[e]);
        for (int j = 0; j < c; ++j) oi[j] += w * bj[j];
      }
    }
  }

  // out += this^T * g, computed by scattering rows; avoids materializing the
  // transpose.
  void accum_transposed(const DenseMatrix& g, DenseMatrix& out) const {
    const int c = g.cols;
    for (int i = 0; i < rows; ++i) {
      const double* gi = g.row(i);
      for (int e = row_ptr[i]; e < row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        const double w = values[e];
        double* oj = out.row(col_idx[e]);
        for (int j = 0; j < c; ++j) oj[j] += w * gi[j];
      }
    }
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int e = row_ptr[i]; e < row_ptr[static_cast<size_t>(i) + 1]; ++e)
        d(i, col_idx[e]) = values[e];
    return d;
  }

  void validate_canonical() const {
    require(static_cast<int>(row_ptr.size()) == rows + 1, "CSR: row_ptr length mismatch");
    require(row_ptr[0] == 0 && row_ptr[rows] == nnz(), "CSR: row_ptr bounds mismatch");
    for (int i = 0; i < rows; ++i) {
      require(row_ptr[i] <= row_ptr[static_cast<size_t>(i) + 1], "CSR: row_ptr not monotone");
      for (int e = row_ptr[i]; e < row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        require(col_idx[e] >= 0 && col_idx[e] < cols, "CSR: column index out of range");
        if (e > row_ptr[i])
          require(col_idx[e - 1] < col_idx[e], "CSR: columns not strictly increasing in row " +
                                                   std::to_string(i));
      }
    }
  }
};

// Directed edge-slot view of a symmetric sparse matrix: one slot per stored
// (i,j) entry in CSR order, plus the index of the opposite slot (j,i).
// Edge fields (one value per slot per class) live on this structure.
struct EdgeStructure {
  int n = 0;
  int slots = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> weight;
  std::vector<int> transpose_slot;

  static EdgeStructure build(const SparseMatrix& s) {
    require(s.rows == s.cols, "EdgeStructure: matrix not square");
    EdgeStructure es;
    es.n = s.rows;
    es.slots = s.nnz();
    es.row_ptr = s.row_ptr;
    es.col_idx = s.col_idx;
    es.weight = s.values;
    es.transpose_slot.assign(es.slots, -1);
    for (int i = 0; i < es.n; ++i) {
      for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        int j = es.col_idx[e];
        require(i != j, "EdgeStructure: self-loop at node " + std::to_string(i));
        const int* begin = es.col_idx.data() + es.row_ptr[j];
        const int* end = es.col_idx.data() + es.row_ptr[static_cast<size_t>(j) + 1];
        const int* it = std::lower_bound(begin, end, i);
        require(it != end && *it == i,
                "EdgeStructure: pattern not symmetric at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
        const int opposite = static_cast<int>(it - es.col_idx.data());
        // The edge calculus (gradient/divergence adjointness) assumes
        // symmetric weights, so reject matrices that only look symmetric.
        require(std::abs(es.weight[e] - es.weight[opposite]) <=
                    1e-12 * std::max(1.0, std::abs(es.weight[e])),
                "EdgeStructure: weights not symmetric at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
        es.transpose_slot[e] = opposite;
      }
    }
    return es;
  }

  int slot_row(int slot) const {
    // only used in diagnostics; linear scan over row_ptr via upper_bound
    auto it = std::upper_bound(row_ptr.begin(), row_ptr.end(), slot);
    return static_cast<int>(it - row_ptr.begin()) - 1;
  }
};

}  // namespace tvgnn
