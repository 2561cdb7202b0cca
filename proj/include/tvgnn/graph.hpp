#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tvgnn/common.hpp"
#include "tvgnn/sparse.hpp"

namespace tvgnn {

// Undirected simple graph with one class label per node. The adjacency is a
// binary symmetric CSR matrix with an empty diagonal.
struct Graph {
  int n = 0;
  SparseMatrix adj;
  std::vector<int> labels;
  int num_classes = 0;

  static Graph create(int n, const std::vector<std::pair<int, int>>& edges,
                      std::vector<int> labels, int num_classes) {
    std::vector<std::pair<int, int>> dedup;
    dedup.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
      require(u >= 0 && u < n && v >= 0 && v < n,
              "Graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                  ") out of range for " + std::to_string(n) + " nodes");
      require(u != v, "Graph: self-loop at node " + std::to_string(u));
      dedup.emplace_back(u, v);
      dedup.emplace_back(v, u);
    }
    std::sort(dedup.begin(), dedup.end());
    dedup.erase(std::unique(dedup.begin(), dedup.end()), dedup.end());
    std::vector<std::tuple<int, int, double>> trips;
    trips.reserve(dedup.size());
    for (const auto& [u, v] : dedup) trips.emplace_back(u, v, 1.0);
    Graph g;
    g.n = n;
    g.adj = SparseMatrix::from_triplets(n, n, trips);
    g.labels = std::move(labels);
    g.num_classes = num_classes;
    g.validate();
    return g;
  }

  int num_edges() const { return adj.nnz() / 2; }

  void validate() const {
    require(n >= 1, "Graph: empty graph");
    require(adj.rows == n && adj.cols == n,
            "Graph: adjacency is " + shape_str(adj.rows, adj.cols) + " for " +
                std::to_string(n) + " nodes");
    adj.validate_canonical();
    require(adj.is_symmetric(0.0), "Graph: adjacency is not symmetric");
    for (int i = 0; i < n; ++i)
      require(!adj.has_entry(i, i), "Graph: self-loop stored at node " + std::to_string(i));
    for (double w : adj.values)
      require(w == 1.0, "Graph: non-binary adjacency entry " + std::to_string(w));
    require(static_cast<int>(labels.size()) == n,
            "Graph: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                " nodes");
    require(num_classes >= 2, "Graph: need at least 2 classes, got " +
                                  std::to_string(num_classes));
    for (int i = 0; i < n; ++i)
      require(labels[i] >= 0 && labels[i] < num_classes,
              "Graph: label " + std::to_string(labels[i]) + " at node " + std::to_string(i) +
                  " outside [0," + std::to_string(num_classes) + ")");
  }
};

inline SparseMatrix add_self_loops(const SparseMatrix& a) {
  require(a.rows == a.cols, "add_self_loops: matrix is " + shape_str(a.rows, a.cols));
  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(a.col_idx.size() + a.rows);
  for (int i = 0; i < a.rows; ++i) {
    bool has_diag = false;
    for (int e = a.row_ptr[i]; e < a.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
      double w = a.values[e];
      if (a.col_idx[e] == i) {
        w += 1.0;
        has_diag = true;
      }
      trips.emplace_back(i, a.col_idx[e], w);
    }
    if (!has_diag) trips.emplace_back(i, i, 1.0);
  }
  return SparseMatrix::from_triplets(a.rows, a.cols, trips);
}

// D^{-1/2} A D^{-1/2} with row-sum degrees. Entries must be non-negative;
// rows with zero degree are left zero.
inline SparseMatrix sym_normalize(const SparseMatrix& a) {
  require(a.rows == a.cols, "sym_normalize: matrix is " + shape_str(a.rows, a.cols));
  std::vector<double> inv_sqrt_deg(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double d = 0.0;
    for (int e = a.row_ptr[i]; e < a.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
      require(a.values[e] >= 0.0, "sym_normalize: negative entry at row " + std::to_string(i));
      d += a.values[e];
    }
    if (d > 0.0) inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  SparseMatrix out = a;
  for (int i = 0; i < a.rows; ++i)
    for (int e = a.row_ptr[i]; e < a.row_ptr[static_cast<size_t>(i) + 1]; ++e)
      out.values[e] = a.values[e] * inv_sqrt_deg[i] * inv_sqrt_deg[a.col_idx[e]];
  return out;
}

// D^{-1} A: each stored row divided by its degree. Rows with zero degree are
// left zero. Used for mean neighborhood aggregation.
inline SparseMatrix row_normalize(const SparseMatrix& a) {
  SparseMatrix out = a;
  for (int i = 0; i < a.rows; ++i) {
    double d = 0.0;
    for (int e = a.row_ptr[i]; e < a.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
      require(a.values[e] >= 0.0, "row_normalize: negative entry at row " + std::to_string(i));
      d += a.values[e];
    }
    if (d == 0.0) continue;
    for (int e = a.row_ptr[i]; e < a.row_ptr[static_cast<size_t>(i) + 1]; ++e)
      out.values[e] = a.values[e] / d;
  }
  return out;
}

// Edge similarity used by the regularizer: the symmetrically normalized
// adjacency without self-loops, so S_ij > 0 exactly on edges.
inline SparseMatrix similarity_matrix(const Graph& g) { return sym_normalize(g.adj); }

// Propagation matrix with self-loops added before normalization.
inline SparseMatrix renormalized_adjacency(const SparseMatrix& adj) {
  return sym_normalize(add_self_loops(adj));
}

// Oracle similarity: 1 on every off-diagonal same-label pair, 0 elsewhere.
// No degree normalization is applied.
inline SparseMatrix ideal_similarity(const std::vector<int>& labels, int num_classes) {
  const int n = static_cast<int>(labels.size());
  std::vector<std::vector<int>> members(static_cast<size_t>(num_classes));
  for (int i = 0; i < n; ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes,
            "ideal_similarity: label " + std::to_string(labels[i]) + " outside [0," +
                std::to_string(num_classes) + ")");
    members[labels[i]].push_back(i);
  }
  SparseMatrix s;
  s.rows = n;
  s.cols = n;
  s.row_ptr.assign(static_cast<size_t>(n) + 1, 0);
  for (int c = 0; c < num_classes; ++c)
    for (int i : members[c]) s.row_ptr[static_cast<size_t>(i) + 1] = static_cast<int>(members[c].size()) - 1;
  for (int i = 0; i < n; ++i) s.row_ptr[static_cast<size_t>(i) + 1] += s.row_ptr[i];
  s.col_idx.resize(s.row_ptr[static_cast<size_t>(n)]);
  s.values.assign(s.col_idx.size(), 1.0);
  std::vector<int> cursor(s.row_ptr.begin(), s.row_ptr.end() - 1);
  for (int c = 0; c < num_classes; ++c)
    for (int i : members[c])
      for (int j : members[c])
        if (i != j) s.col_idx[cursor[i]++] = j;
  s.validate_canonical();
  return s;
}

struct ComponentResult {
  Graph graph;
  std::vector<int> kept;  // original node id of each new node, ascending
};

// Restricts the graph to its largest connected component. Ties go to the
// component containing the smallest node id. Kept nodes preserve their
// relative order.
inline ComponentResult largest_connected_component(const Graph& g) {
  std::vector<int> comp(g.n, -1);
  int num_comp = 0;
  std::vector<int> stack;
  std::vector<int> comp_size;
  for (int s = 0; s < g.n; ++s) {
    if (comp[s] >= 0) continue;
    const int c = num_comp++;
    comp_size.push_back(0);
    stack.push_back(s);
    comp[s] = c;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      ++comp_size[c];
      for (int e = g.adj.row_ptr[u]; e < g.adj.row_ptr[static_cast<size_t>(u) + 1]; ++e) {
        const int v = g.adj.col_idx[e];
        if (comp[v] < 0) {
          comp[v] = c;
          stack.push_back(v);
        }
      }
    }
  }
  int best = 0;
  for (int c = 1; c < num_comp; ++c)
    if (comp_size[c] > comp_size[best]) best = c;

  ComponentResult out;
  std::vector<int> remap(g.n, -1);
  for (int i = 0; i < g.n; ++i) {
    if (comp[i] != best) continue;
    remap[i] = static_cast<int>(out.kept.size());
    out.kept.push_back(i);
  }
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;
  labels.reserve(out.kept.size());
  for (int i : out.kept) {
    labels.push_back(g.labels[i]);
    for (int e = g.adj.row_ptr[i]; e < g.adj.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
      const int j = g.adj.col_idx[e];
      if (i < j && remap[j] >= 0) edges.emplace_back(remap[i], remap[j]);
    }
  }
  out.graph = Graph::create(static_cast<int>(out.kept.size()), edges, std::move(labels),
                            g.num_classes);
  return out;
}

}  // namespace tvgnn
