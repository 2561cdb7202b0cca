#pragma once

#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tvgnn/common.hpp"
#include "tvgnn/dense.hpp"
#include "tvgnn/graph.hpp"
#include "tvgnn/rng.hpp"
#include "tvgnn/sparse.hpp"
#include "tvgnn/tape.hpp"

namespace tvgnn {

enum class ModelKind { kGcn, kSageMean, kSageMaxPool };

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kGcn: return "gcn";
    case ModelKind::kSageMean: return "sage-mean";
    case ModelKind::kSageMaxPool: return "sage-maxpool";
  }
  fail("model_kind_name: bad kind");
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "gcn") return ModelKind::kGcn;
  if (s == "sage-mean") return ModelKind::kSageMean;
  if (s == "sage-maxpool") return ModelKind::kSageMaxPool;
  fail("unknown model kind '" + s + "' (expected gcn, sage-mean, or sage-maxpool)");
}

struct ModelConfig {
  ModelKind kind = ModelKind::kGcn;
  int hidden = 16;
  double dropout = 0.5;
  double weight_decay = 5e-4;      // first-layer weights only
  double lr = 0.01;
  bool sage_l2_normalize = false;  // row-normalize the hidden layer

  static ModelConfig defaults(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    c.hidden = kind == ModelKind::kGcn ? 16 : 64;
    return c;
  }
};

// Glorot (uniform) fan-based initialization, drawn row-major.
inline DenseMatrix glorot_init(int rows, int cols, Rng& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  DenseMatrix m(rows, cols);
  for (auto& x : m.v) x = rng.uniform(-a, a);
  return m;
}

inline SparseMatrix sparsify(const DenseMatrix& m) {
  SparseMatrix s;
  s.rows = m.rows;
  s.cols = m.cols;
  s.row_ptr.assign(static_cast<size_t>(m.rows) + 1, 0);
  for (int i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j)
      if (r[j] != 0.0) {
        s.col_idx.push_back(j);
        s.values.push_back(r[j]);
      }
    s.row_ptr[static_cast<size_t>(i) + 1] = static_cast<int>(s.col_idx.size());
  }
  return s;
}

// Inverted dropout over the stored entries of a sparse matrix. Masking an
// absent (zero) entry is a no-op, so only stored values consume draws, one
// uniform per nonzero in CSR order.
inline SparseMatrix dropout_sparse(const SparseMatrix& s, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout_sparse: rate must be in [0,1)");
  SparseMatrix out = s;
  const double keep = 1.0 - rate;
  for (auto& v : out.values) v = rng.uniform() < keep ? v / keep : 0.0;
  return out;
}

// Two-layer graph network producing per-node class logits (no output
// softmax). The propagation structure and the feature matrix are fixed at
// construction; the weight matrices are the learnable state. Forward passes
// consume the run RNG only for dropout masks, and only when training.
struct GnnModel {
  ModelConfig cfg;
  int num_classes = 0;
  SparseMatrix prop;        // gcn: renormalized adjacency; sage-mean: row-normalized
                            // adjacency; sage-maxpool: raw adjacency pattern
  SparseMatrix feat_sparse; // gcn input features
  DenseMatrix feat_dense;   // sage input features
  Parameter w0, w1;
  Parameter pool0, pool1;   // sage-maxpool projections

  static GnnModel create(const ModelConfig& cfg, const Graph& g, const DenseMatrix& features,
                         Rng& init_rng) {
    require(features.rows == g.n, "GnnModel: " + std::to_string(features.rows) +
                                      " feature rows for " + std::to_string(g.n) + " nodes");
    require(cfg.hidden >= 1, "GnnModel: hidden size must be positive");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "GnnModel: dropout must be in [0,1)");
    GnnModel m;
    m.cfg = cfg;
    m.num_classes = g.num_classes;
    const int f = features.cols;
    const int h = cfg.hidden;
    const int k = g.num_classes;
    switch (cfg.kind) {
      case ModelKind::kGcn:
        m.prop = renormalized_adjacency(g.adj);
        m.feat_sparse = sparsify(features);
        m.w0 = Parameter::matrix("w0", glorot_init(f, h, init_rng), cfg.lr);
        m.w1 = Parameter::matrix("w1", glorot_init(h, k, init_rng), cfg.lr);
        break;
      case ModelKind::kSageMean:
        m.prop = row_normalize(g.adj);
        m.feat_dense = features;
        m.w0 = Parameter::matrix("w0", glorot_init(2 * f, h, init_rng), cfg.lr);
        m.w1 = Parameter::matrix("w1", glorot_init(2 * h, k, init_rng), cfg.lr);
        break;
      case ModelKind::kSageMaxPool:
        m.prop = g.adj;
        m.feat_dense = features;
        m.pool0 = Parameter::matrix("pool0", glorot_init(f, h, init_rng), cfg.lr);
        m.w0 = Parameter::matrix("w0", glorot_init(f + h, h, init_rng), cfg.lr);
        m.pool1 = Parameter::matrix("pool1", glorot_init(h, h, init_rng), cfg.lr);
        m.w1 = Parameter::matrix("w1", glorot_init(2 * h, k, init_rng), cfg.lr);
        break;
    }
    return m;
  }

  std::vector<Parameter*> parameters() {
    if (cfg.kind == ModelKind::kSageMaxPool) return {&w0, &w1, &pool0, &pool1};
    return {&w0, &w1};
  }

  // Per-node class logits as a tape value. `rng` is consumed only when
  // `training` is true and dropout is active.
  Value logits(Tape& t, bool training, Rng& rng) {
    const bool drop = training && cfg.dropout > 0.0;
    switch (cfg.kind) {
      case ModelKind::kGcn: {
        Value xw = drop ? t.spmm_owned(dropout_sparse(feat_sparse, cfg.dropout, rng), t.param(w0))
                        : t.spmm(feat_sparse, t.param(w0));
        Value h = t.relu(t.spmm(prop, xw));
        if (drop) h = t.dropout(h, cfg.dropout, rng);
        return t.spmm(prop, t.matmul(h, t.param(w1)));
      }
      case ModelKind::kSageMean: {
        Value x = t.constant_ref(feat_dense);
        if (drop) x = t.dropout(x, cfg.dropout, rng);
        Value h = t.relu(t.matmul(t.concat_cols(x, t.spmm(prop, x)), t.param(w0)));
        if (cfg.sage_l2_normalize) h = t.row_l2_normalize(h);
        if (drop) h = t.dropout(h, cfg.dropout, rng);
        return t.matmul(t.concat_cols(h, t.spmm(prop, h)), t.param(w1));
      }
      case ModelKind::kSageMaxPool: {
        Value x = t.constant_ref(feat_dense);
        if (drop) x = t.dropout(x, cfg.dropout, rng);
        Value pooled0 = t.relu(t.matmul(x, t.param(pool0)));
        Value h = t.relu(t.matmul(t.concat_cols(x, t.neighbor_max(prop, pooled0)), t.param(w0)));
        if (cfg.sage_l2_normalize) h = t.row_l2_normalize(h);
        if (drop) h = t.dropout(h, cfg.dropout, rng);
        Value pooled1 = t.relu(t.matmul(h, t.param(pool1)));
        return t.matmul(t.concat_cols(h, t.neighbor_max(prop, pooled1)), t.param(w1));
      }
    }
    fail("logits: bad model kind");
  }

  // 0.5 * weight_decay * sum of squares of the first-layer weights, or an
  // invalid value when weight decay is off.
  Value decay_penalty(Tape& t) {
    if (cfg.weight_decay <= 0.0) return Value{};
    Value acc = t.sum_sq(t.param(w0));
    if (cfg.kind == ModelKind::kSageMaxPool) acc = t.add(acc, t.sum_sq(t.param(pool0)));
    return t.scale_const(acc, 0.5 * cfg.weight_decay);
  }
};

}  // namespace tvgnn
