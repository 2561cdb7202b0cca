#pragma once

// Shared fixtures for the test suite: scratch directories, graph generators,
// and dense reference implementations of the edge calculus. The references
// run on full n x n matrices and use none of the library's sparse code, so
// agreement is meaningful evidence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tvgnn/dense.hpp"
#include "tvgnn/gradcheck.hpp"
#include "tvgnn/graph.hpp"
#include "tvgnn/rng.hpp"
#include "tvgnn/sparse.hpp"

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    const std::string tmpl =
        (std::filesystem::temp_directory_path() / "tvgnn-test-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    tvgnn::require(::mkdtemp(buf.data()) != nullptr, "TempDir: mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }
  std::string sub(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

inline tvgnn::DenseMatrix random_matrix(tvgnn::Rng& rng, int rows, int cols, double lo = -1.0,
                                        double hi = 1.0) {
  tvgnn::DenseMatrix m = tvgnn::DenseMatrix::zeros(rows, cols);
  for (auto& x : m.v) x = rng.uniform(lo, hi);
  return m;
}

// Erdos-Renyi style graph with random labels; guarantees at least one edge.
inline tvgnn::Graph random_graph(tvgnn::Rng& rng, int n, int num_classes, double p) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  if (edges.empty()) edges.emplace_back(0, 1);
  std::vector<int> labels(static_cast<size_t>(n));
  for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<uint64_t>(num_classes)));
  return tvgnn::Graph::create(n, edges, labels, num_classes);
}

struct SyntheticData {
  tvgnn::Graph graph;
  tvgnn::DenseMatrix features;
};

// Two planted communities of `size` nodes each (labels 0 and 1): a ring
// inside each community keeps it connected, extra within/cross pairs are
// sampled with p_in/p_out, and one bridge joins the halves. Features are a
// 4-column community indicator pattern plus uniform noise, so the classes
// are separable whenever the noise is small.
inline SyntheticData planted_two_communities(tvgnn::Rng& rng, int size, double p_in,
                                             double p_out, double noise) {
  tvgnn::require(size >= 3, "planted_two_communities: need at least 3 nodes per side");
  const int n = 2 * size;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool same = (i < size) == (j < size);
      if (rng.uniform() < (same ? p_in : p_out)) edges.emplace_back(i, j);
    }
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < size; ++k) edges.emplace_back(c * size + k, c * size + (k + 1) % size);
  edges.emplace_back(0, size);
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i < size ? 0 : 1;
  SyntheticData d;
  d.graph = tvgnn::Graph::create(n, edges, labels, 2);
  d.features = tvgnn::DenseMatrix::zeros(n, 4);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < 4; ++f) {
      const double mean = ((labels[i] == 0) == (f < 2)) ? 1.0 : 0.0;
      d.features(i, f) = mean + noise * (rng.uniform() * 2.0 - 1.0);
    }
  return d;
}

// --- dense references ------------------------------------------------------
// Edge fields live on (n*n) x k matrices with slot (i,j) stored at row
// i*n + j; rows of non-edges stay zero. `s` is the dense n x n similarity.

inline tvgnn::DenseMatrix dense_similarity(const tvgnn::EdgeStructure& es) {
  tvgnn::DenseMatrix s = tvgnn::DenseMatrix::zeros(es.n, es.n);
  for (int i = 0; i < es.n; ++i)
    for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e)
      s(i, es.col_idx[e]) = es.weight[e];
  return s;
}

// Copies a slots x k field into the dense (n*n) x k layout.
inline tvgnn::DenseMatrix spread_field(const tvgnn::EdgeStructure& es,
                                       const tvgnn::DenseMatrix& v) {
  tvgnn::DenseMatrix out = tvgnn::DenseMatrix::zeros(es.n * es.n, v.cols);
  for (int i = 0; i < es.n; ++i)
    for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e)
      for (int c = 0; c < v.cols; ++c) out(i * es.n + es.col_idx[e], c) = v(e, c);
  return out;
}

// Collects the dense (n*n) x k layout back onto the stored slots.
inline tvgnn::DenseMatrix gather_field(const tvgnn::EdgeStructure& es,
                                       const tvgnn::DenseMatrix& dense) {
  tvgnn::DenseMatrix out = tvgnn::DenseMatrix::zeros(es.slots, dense.cols);
  for (int i = 0; i < es.n; ++i)
    for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e)
      for (int c = 0; c < dense.cols; ++c) out(e, c) = dense(i * es.n + es.col_idx[e], c);
  return out;
}

inline tvgnn::DenseMatrix ref_nl_gradient(const tvgnn::DenseMatrix& s,
                                          const tvgnn::DenseMatrix& a) {
  const int n = s.rows;
  tvgnn::DenseMatrix out = tvgnn::DenseMatrix::zeros(n * n, a.cols);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (s(i, j) == 0.0) continue;
      for (int c = 0; c < a.cols; ++c) out(i * n + j, c) = s(i, j) * (a(j, c) - a(i, c));
    }
  return out;
}

inline tvgnn::DenseMatrix ref_nl_divergence(const tvgnn::DenseMatrix& s,
                                            const tvgnn::DenseMatrix& field) {
  const int n = s.rows;
  tvgnn::DenseMatrix out = tvgnn::DenseMatrix::zeros(n, field.cols);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (s(i, j) == 0.0) continue;
      for (int c = 0; c < field.cols; ++c)
        out(i, c) += s(i, j) * (field(i * n + j, c) - field(j * n + i, c));
    }
  return out;
}

// Per (node row, class) projection onto the Euclidean unit ball; the global
// variant divides every over-norm block of a class by the class-wide maximum
// block norm instead of its own.
inline tvgnn::DenseMatrix ref_project(const tvgnn::DenseMatrix& s,
                                      const tvgnn::DenseMatrix& field, bool global) {
  const int n = s.rows;
  tvgnn::DenseMatrix out = field;
  for (int c = 0; c < field.cols; ++c) {
    std::vector<double> norms(static_cast<size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        if (s(j, i) != 0.0) acc += field(j * n + i, c) * field(j * n + i, c);
      norms[j] = std::sqrt(acc);
    }
    double cap = 0.0;
    for (double x : norms) cap = std::max(cap, x);
    if (global && cap <= 1.0) continue;
    for (int j = 0; j < n; ++j) {
      if (norms[j] <= 1.0) continue;
      const double divisor = global ? cap : norms[j];
      for (int i = 0; i < n; ++i)
        if (s(j, i) != 0.0) out(j * n + i, c) = field(j * n + i, c) / divisor;
    }
  }
  return out;
}

inline tvgnn::DenseMatrix ref_row_softmax(const tvgnn::DenseMatrix& o) {
  tvgnn::DenseMatrix out = o;
  for (int i = 0; i < o.rows; ++i) {
    double m = o(i, 0);
    for (int j = 1; j < o.cols; ++j) m = std::max(m, o(i, j));
    double z = 0.0;
    for (int j = 0; j < o.cols; ++j) z += std::exp(o(i, j) - m);
    for (int j = 0; j < o.cols; ++j) out(i, j) = std::exp(o(i, j) - m) / z;
  }
  return out;
}

struct RefRegSoftmax {
  tvgnn::DenseMatrix probs;  // n x k
  tvgnn::DenseMatrix eta;    // (n*n) x k dense field
};

inline RefRegSoftmax ref_reg_softmax(const tvgnn::DenseMatrix& s, const tvgnn::DenseMatrix& o,
                                     double tau, double lambda, double epsilon, int t_steps,
                                     bool global) {
  const int n = s.rows;
  RefRegSoftmax r;
  r.probs = ref_row_softmax(o);
  r.eta = tvgnn::DenseMatrix::zeros(n * n, o.cols);
  for (int t = 0; t < t_steps; ++t) {
    const tvgnn::DenseMatrix g = ref_nl_gradient(s, r.probs);
    tvgnn::DenseMatrix pre = r.eta;
    for (size_t i = 0; i < pre.v.size(); ++i) pre.v[i] -= tau * g.v[i];
    r.eta = ref_project(s, pre, global);
    const tvgnn::DenseMatrix div = ref_nl_divergence(s, r.eta);
    tvgnn::DenseMatrix smoothed = o;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < o.cols; ++c)
        smoothed(i, c) = (o(i, c) - lambda * div(i, c)) / epsilon;
    r.probs = ref_row_softmax(smoothed);
  }
  return r;
}

}  // namespace testutil
