#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tvgnn/common.hpp"
#include "tvgnn/dense.hpp"
#include "tvgnn/rng.hpp"
#include "tvgnn/sparse.hpp"

namespace tvgnn {

// A trainable quantity. Scalars are stored as 1x1 matrices. The gradient is
// written by Tape::backward; the per-parameter learning rate and clamp are
// consumed by the optimizer.
struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
  bool learnable = true;
  double lr = 0.01;
  bool has_clamp_min = false;
  double clamp_min = 0.0;

  static Parameter matrix(std::string name, DenseMatrix value, double lr = 0.01) {
    Parameter p;
    p.name = std::move(name);
    p.grad = DenseMatrix::zeros(value.rows, value.cols);
    p.value = std::move(value);
    p.lr = lr;
    require(p.lr > 0.0, "Parameter " + p.name + ": learning rate must be positive");
    return p;
  }

  static Parameter scalar(std::string name, double value, double lr = 0.01) {
    return matrix(std::move(name), DenseMatrix::scalar(value), lr);
  }

  double scalar_value() const { return value.scalar_value(); }

  void set_clamp_min(double lo) {
    has_clamp_min = true;
    clamp_min = lo;
  }
};

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. Nodes are appended in topological
// order by construction; forward values are computed eagerly at record time.
// Sparse matrices and edge structures enter as constants only. Node storage
// is a deque so references returned by val() stay valid while further nodes
// are recorded.
class Tape {
  enum class Op {
    kConstant,
    kParam,
    kMatMul,
    kSpmm,
    kAdd,
    kSub,
    kHadamard,
    kHadamardConst,
    kRelu,
    kConcatCols,
    kRowLog,
    kClipMin,
    kScaleConst,
    kScaleBy,
    kReciprocal,
    kSumAll,
    kSumSq,
    kRowSoftmax,
    kRowL2Normalize,
    kNlGradient,
    kNlDivergence,
    kProjectRows,
    kNeighborMax,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    DenseMatrix owned;
    const DenseMatrix* ext = nullptr;
    DenseMatrix grad;
    bool needs_grad = false;
    double c = 0.0;
    DenseMatrix aux;
    std::vector<int> iaux;
    const SparseMatrix* sp = nullptr;
    std::unique_ptr<SparseMatrix> sp_own;
    const EdgeStructure* es = nullptr;
    Parameter* param = nullptr;
    bool flag = false;

    const DenseMatrix& value() const { return ext ? *ext : owned; }
  };

 public:
  size_t size() const { return nodes_.size(); }

  const DenseMatrix& val(Value v) const { return node(v).value(); }

  // Gradient of the last backward() w.r.t. this value; zeros if the value was
  // not reached.
  DenseMatrix grad(Value v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return DenseMatrix::zeros(n.value().rows, n.value().cols);
    return n.grad;
  }

  Value constant(DenseMatrix m) {
    Node n;
    n.op = Op::kConstant;
    n.owned = std::move(m);
    return push(std::move(n));
  }

  // The caller keeps `m` alive for the lifetime of the tape.
  Value constant_ref(const DenseMatrix& m) {
    Node n;
    n.op = Op::kConstant;
    n.ext = &m;
    return push(std::move(n));
  }

  // Inserting the same Parameter twice yields the same node, so gradient
  // contributions from every use accumulate in one place. Frozen parameters
  // behave as constants: backward() reports zeros for them and skips every
  // branch of the graph that only they reach.
  Value param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Value{it->second};
    Node n;
    n.op = Op::kParam;
    n.ext = &p.value;
    n.param = &p;
    n.needs_grad = p.learnable;
    Value v = push(std::move(n));
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  Value matmul(Value a, Value b) {
    const DenseMatrix& ma = val(a);
    const DenseMatrix& mb = val(b);
    require(ma.cols == mb.rows, "matmul: inner dimensions disagree, " +
                                    shape_str(ma.rows, ma.cols) + " * " +
                                    shape_str(mb.rows, mb.cols));
    Node n = binary(Op::kMatMul, a, b);
    matmul_into(ma, mb, n.owned);
    return push(std::move(n));
  }

  Value spmm(const SparseMatrix& s, Value b) {
    Node n = unary(Op::kSpmm, b);
    n.sp = &s;
    s.multiply_into(val(b), n.owned);
    return push(std::move(n));
  }

  Value spmm_owned(SparseMatrix s, Value b) {
    Node n = unary(Op::kSpmm, b);
    n.sp_own = std::make_unique<SparseMatrix>(std::move(s));
    n.sp = n.sp_own.get();
    n.sp->multiply_into(val(b), n.owned);
    return push(std::move(n));
  }

  Value add(Value a, Value b) { return elementwise(Op::kAdd, a, b); }
  Value sub(Value a, Value b) { return elementwise(Op::kSub, a, b); }
  Value hadamard(Value a, Value b) { return elementwise(Op::kHadamard, a, b); }

  Value hadamard_const(Value a, DenseMatrix mask) {
    const DenseMatrix& ma = val(a);
    require(ma.same_shape(mask), "hadamard_const: shapes " + shape_str(ma.rows, ma.cols) +
                                     " vs " + shape_str(mask.rows, mask.cols));
    Node n = unary(Op::kHadamardConst, a);
    n.aux = std::move(mask);
    n.owned = ma;
    for (size_t i = 0; i < n.owned.v.size(); ++i) n.owned.v[i] *= n.aux.v[i];
    return push(std::move(n));
  }

  // Inverted dropout: kept entries are scaled by 1/keep so eval needs no
  // rescaling. Mask draws are row-major, one uniform per entry.
  Value dropout(Value a, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (rate == 0.0) return a;
    const DenseMatrix& ma = val(a);
    const double keep = 1.0 - rate;
    DenseMatrix mask(ma.rows, ma.cols);
    for (auto& m : mask.v) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return hadamard_const(a, std::move(mask));
  }

  Value relu(Value a) {
    Node n = unary(Op::kRelu, a);
    n.owned = val(a);
    for (auto& x : n.owned.v) x = x > 0.0 ? x : 0.0;
    return push(std::move(n));
  }

  Value concat_cols(Value a, Value b) {
    const DenseMatrix& ma = val(a);
    const DenseMatrix& mb = val(b);
    require(ma.rows == mb.rows, "concat_cols: row counts disagree, " +
                                    shape_str(ma.rows, ma.cols) + " vs " +
                                    shape_str(mb.rows, mb.cols));
    Node n = binary(Op::kConcatCols, a, b);
    n.owned = DenseMatrix(ma.rows, ma.cols + mb.cols);
    for (int i = 0; i < ma.rows; ++i) {
      double* out = n.owned.row(i);
      const double* ra = ma.row(i);
      const double* rb = mb.row(i);
      for (int j = 0; j < ma.cols; ++j) out[j] = ra[j];
      for (int j = 0; j < mb.cols; ++j) out[ma.cols + j] = rb[j];
    }
    return push(std::move(n));
  }

  Value row_log(Value a) {
    const DenseMatrix& ma = val(a);
    for (int i = 0; i < ma.rows; ++i)
      for (int j = 0; j < ma.cols; ++j)
        require(ma(i, j) > 0.0, "row_log: non-positive entry at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
    Node n = unary(Op::kRowLog, a);
    n.owned = ma;
    for (auto& x : n.owned.v) x = std::log(x);
    return push(std::move(n));
  }

  Value clip_min(Value a, double lo) {
    Node n = unary(Op::kClipMin, a);
    n.c = lo;
    n.owned = val(a);
    for (auto& x : n.owned.v) x = x < lo ? lo : x;
    return push(std::move(n));
  }

  Value scale_const(Value a, double c) {
    Node n = unary(Op::kScaleConst, a);
    n.c = c;
    n.owned = val(a);
    for (auto& x : n.owned.v) x *= c;
    return push(std::move(n));
  }

  // out = a * theta with theta a 1x1 value; theta receives <grad, a>.
  Value scale_by(Value a, Value theta) {
    const DenseMatrix& mt = val(theta);
    require(mt.is_scalar(), "scale_by: scale must be 1x1, got " + shape_str(mt.rows, mt.cols));
    Node n = binary(Op::kScaleBy, a, theta);
    const double s = mt.v[0];
    n.owned = val(a);
    for (auto& x : n.owned.v) x *= s;
    return push(std::move(n));
  }

  Value reciprocal(Value a) {
    const DenseMatrix& ma = val(a);
    require(ma.is_scalar(), "reciprocal: input must be 1x1, got " + shape_str(ma.rows, ma.cols));
    require(ma.v[0] != 0.0, "reciprocal: division by zero");
    Node n = unary(Op::kReciprocal, a);
    n.owned = DenseMatrix::scalar(1.0 / ma.v[0]);
    return push(std::move(n));
  }

  Value sum_all(Value a) {
    Node n = unary(Op::kSumAll, a);
    double acc = 0.0;
    for (double x : val(a).v) acc += x;
    n.owned = DenseMatrix::scalar(acc);
    return push(std::move(n));
  }

  Value sum_sq(Value a) {
    Node n = unary(Op::kSumSq, a);
    double acc = 0.0;
    for (double x : val(a).v) acc += x * x;
    n.owned = DenseMatrix::scalar(acc);
    return push(std::move(n));
  }

  // Numerically stable row-wise softmax (per-row max subtraction).
  Value row_softmax(Value a) {
    const DenseMatrix& ma = val(a);
    require(all_finite(ma), "row_softmax: non-finite input");
    Node n = unary(Op::kRowSoftmax, a);
    n.owned = DenseMatrix(ma.rows, ma.cols);
    for (int i = 0; i < ma.rows; ++i) {
      const double* x = ma.row(i);
      double* y = n.owned.row(i);
      double mx = x[0];
      for (int j = 1; j < ma.cols; ++j) mx = std::max(mx, x[j]);
      double denom = 0.0;
      for (int j = 0; j < ma.cols; ++j) {
        y[j] = std::exp(x[j] - mx);
        denom += y[j];
      }
      for (int j = 0; j < ma.cols; ++j) y[j] /= denom;
    }
    return push(std::move(n));
  }

  // Rows with zero norm stay zero.
  Value row_l2_normalize(Value a) {
    const DenseMatrix& ma = val(a);
    Node n = unary(Op::kRowL2Normalize, a);
    n.owned = ma;
    for (int i = 0; i < ma.rows; ++i) {
      double* y = n.owned.row(i);
      double nrm = 0.0;
      for (int j = 0; j < ma.cols; ++j) nrm += y[j] * y[j];
      nrm = std::sqrt(nrm);
      if (nrm > 0.0)
        for (int j = 0; j < ma.cols; ++j) y[j] /= nrm;
    }
    return push(std::move(n));
  }

  // Edge-field of per-class weighted differences: slot (i,j) of class k holds
  // w_ij * (a[j,k] - a[i,k]). Input is nodes x classes, output slots x classes.
  Value nl_gradient(const EdgeStructure& es, Value a) {
    const DenseMatrix& ma = val(a);
    require(ma.rows == es.n, "nl_gradient: node count " + std::to_string(ma.rows) +
                                 " does not match edge structure (" + std::to_string(es.n) + ")");
    Node n = unary(Op::kNlGradient, a);
    n.es = &es;
    n.owned = DenseMatrix(es.slots, ma.cols);
    const int k = ma.cols;
    for (int i = 0; i < es.n; ++i) {
      const double* ai = ma.row(i);
      for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        const double w = es.weight[e];
        const double* aj = ma.row(es.col_idx[e]);
        double* out = n.owned.row(e);
        for (int c = 0; c < k; ++c) out[c] = w * (aj[c] - ai[c]);
      }
    }
    return push(std::move(n));
  }

  // Per-node weighted antisymmetric sums: node i of class k receives
  // sum over edges (i,j) of w_ij * (v[(i,j),k] - v[(j,i),k]).
  Value nl_divergence(const EdgeStructure& es, Value v) {
    const DenseMatrix& mv = val(v);
    require(mv.rows == es.slots, "nl_divergence: slot count " + std::to_string(mv.rows) +
                                     " does not match edge structure (" +
                                     std::to_string(es.slots) + ")");
    Node n = unary(Op::kNlDivergence, v);
    n.es = &es;
    n.owned = DenseMatrix(es.n, mv.cols);
    const int k = mv.cols;
    for (int i = 0; i < es.n; ++i) {
      double* out = n.owned.row(i);
      for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        const double w = es.weight[e];
        const double* ve = mv.row(e);
        const double* vt = mv.row(es.transpose_slot[e]);
        for (int c = 0; c < k; ++c) out[c] += w * (ve[c] - vt[c]);
      }
    }
    return push(std::move(n));
  }

  // Projects each (node row, class) slot block onto the Euclidean unit ball.
  // The default divides an over-norm row by its own norm. The global variant
  // divides by the largest row norm of the class instead.
  Value project_rows(const EdgeStructure& es, Value v, bool global_norm = false) {
    const DenseMatrix& mv = val(v);
    require(mv.rows == es.slots, "project_rows: slot count " + std::to_string(mv.rows) +
                                     " does not match edge structure (" +
                                     std::to_string(es.slots) + ")");
    Node n = unary(Op::kProjectRows, v);
    n.es = &es;
    n.flag = global_norm;
    n.owned = mv;
    const int k = mv.cols;
    for (int c = 0; c < k; ++c) {
      if (global_norm) {
        double max_norm = 0.0;
        for (int j = 0; j < es.n; ++j) max_norm = std::max(max_norm, block_norm(es, mv, j, c));
        if (max_norm <= 1.0) continue;
        for (int j = 0; j < es.n; ++j) {
          if (block_norm(es, mv, j, c) <= 1.0) continue;
          for (int e = es.row_ptr[j]; e < es.row_ptr[static_cast<size_t>(j) + 1]; ++e)
            n.owned(e, c) = mv(e, c) / max_norm;
        }
      } else {
        for (int j = 0; j < es.n; ++j) {
          const double nrm = block_norm(es, mv, j, c);
          if (nrm <= 1.0) continue;
          for (int e = es.row_ptr[j]; e < es.row_ptr[static_cast<size_t>(j) + 1]; ++e)
            n.owned(e, c) = mv(e, c) / nrm;
        }
      }
    }
    return push(std::move(n));
  }

  // out[i,:] = elementwise max over stored neighbors j of row i of m; nodes
  // with no neighbors produce zero rows. Argmax sources are recorded for the
  // adjoint; ties resolve to the smallest column index.
  Value neighbor_max(const SparseMatrix& pattern, Value m) {
    const DenseMatrix& mm = val(m);
    require(mm.rows == pattern.cols, "neighbor_max: input rows " + std::to_string(mm.rows) +
                                         " do not match pattern columns (" +
                                         std::to_string(pattern.cols) + ")");
    Node n = unary(Op::kNeighborMax, m);
    n.sp = &pattern;
    n.owned = DenseMatrix(pattern.rows, mm.cols);
    n.iaux.assign(static_cast<size_t>(pattern.rows) * mm.cols, -1);
    const int k = mm.cols;
    for (int i = 0; i < pattern.rows; ++i) {
      double* out = n.owned.row(i);
      int* arg = n.iaux.data() + static_cast<size_t>(i) * k;
      for (int e = pattern.row_ptr[i]; e < pattern.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
        const int j = pattern.col_idx[e];
        const double* mj = mm.row(j);
        for (int c = 0; c < k; ++c) {
          if (arg[c] < 0 || mj[c] > out[c]) {
            out[c] = mj[c];
            arg[c] = j;
          }
        }
      }
    }
    return push(std::move(n));
  }

  // Propagates d(loss)/d(node) to every node and writes gradients of all
  // registered Parameters (zeros when unreachable). Accumulators are reset on
  // every call.
  void backward(Value loss) {
    const DenseMatrix& lv = val(loss);
    require(lv.is_scalar(), "backward: loss must be 1x1, got " + shape_str(lv.rows, lv.cols));
    for (auto& n : nodes_) n.grad = DenseMatrix();
    nodes_[loss.id].grad = DenseMatrix::scalar(1.0);
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.empty() || !n.needs_grad) continue;
      pull(n);
    }
    for (auto& [p, id] : param_nodes_) {
      const Node& n = nodes_[id];
      if (n.grad.empty())
        p->grad = DenseMatrix::zeros(p->value.rows, p->value.cols);
      else
        p->grad = n.grad;
    }
  }

 private:
  const Node& node(Value v) const { return nodes_.at(static_cast<size_t>(v.id)); }

  Node unary(Op op, Value a) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.needs_grad = node(a).needs_grad;
    return n;
  }

  Node binary(Op op, Value a, Value b) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    return n;
  }

  Value elementwise(Op op, Value a, Value b) {
    const DenseMatrix& ma = val(a);
    const DenseMatrix& mb = val(b);
    require(ma.same_shape(mb), op_name(op) + ": shapes " + shape_str(ma.rows, ma.cols) +
                                   " vs " + shape_str(mb.rows, mb.cols));
    Node n = binary(op, a, b);
    n.owned = ma;
    switch (op) {
      case Op::kAdd:
        for (size_t i = 0; i < n.owned.v.size(); ++i) n.owned.v[i] += mb.v[i];
        break;
      case Op::kSub:
        for (size_t i = 0; i < n.owned.v.size(); ++i) n.owned.v[i] -= mb.v[i];
        break;
      case Op::kHadamard:
        for (size_t i = 0; i < n.owned.v.size(); ++i) n.owned.v[i] *= mb.v[i];
        break;
      default:
        fail("elementwise: bad op");
    }
    return push(std::move(n));
  }

  static std::string op_name(Op op) {
    switch (op) {
      case Op::kAdd: return "add";
      case Op::kSub: return "sub";
      case Op::kHadamard: return "hadamard";
      default: return "op";
    }
  }

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  static double block_norm(const EdgeStructure& es, const DenseMatrix& m, int node, int cls) {
    double acc = 0.0;
    for (int e = es.row_ptr[node]; e < es.row_ptr[static_cast<size_t>(node) + 1]; ++e)
      acc += m(e, cls) * m(e, cls);
    return std::sqrt(acc);
  }

  DenseMatrix& ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
      const DenseMatrix& v = n.value();
      n.grad = DenseMatrix::zeros(v.rows, v.cols);
    }
    return n.grad;
  }

  bool wants(int id) const { return id >= 0 && nodes_[id].needs_grad; }

  void pull(Node& n) {
    const DenseMatrix& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kMatMul: {
        const DenseMatrix& ma = nodes_[n.a].value();
        const DenseMatrix& mb = nodes_[n.b].value();
        if (wants(n.a)) accum_a_bt(g, mb, ensure_grad(n.a));
        if (wants(n.b)) accum_at_b(ma, g, ensure_grad(n.b));
        break;
      }
      case Op::kSpmm:
        if (wants(n.a)) n.sp->accum_transposed(g, ensure_grad(n.a));
        break;
      case Op::kAdd: {
        if (wants(n.a)) {
          DenseMatrix& ga = ensure_grad(n.a);
          for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (wants(n.b)) {
          DenseMatrix& gb = ensure_grad(n.b);
          for (size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i];
        }
        break;
      }
      case Op::kSub: {
        if (wants(n.a)) {
          DenseMatrix& ga = ensure_grad(n.a);
          for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (wants(n.b)) {
          DenseMatrix& gb = ensure_grad(n.b);
          for (size_t i = 0; i < g.v.size(); ++i) gb.v[i] -= g.v[i];
        }
        break;
      }
      case Op::kHadamard: {
        const DenseMatrix& ma = nodes_[n.a].value();
        const DenseMatrix& mb = nodes_[n.b].value();
        if (wants(n.a)) {
          DenseMatrix& ga = ensure_grad(n.a);
          for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * mb.v[i];
        }
        if (wants(n.b)) {
          DenseMatrix& gb = ensure_grad(n.b);
          for (size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * ma.v[i];
        }
        break;
      }
      case Op::kHadamardConst: {
        if (!wants(n.a)) break;
        DenseMatrix& ga = ensure_grad(n.a);
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * n.aux.v[i];
        break;
      }
      case Op::kRelu: {
        if (!wants(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value();
        DenseMatrix& ga = ensure_grad(n.a);
        for (size_t i = 0; i < g.v.size(); ++i)
          if (x.v[i] > 0.0) ga.v[i] += g.v[i];
        break;
      }
      case Op::kConcatCols: {
        const DenseMatrix& ma = nodes_[n.a].value();
        const DenseMatrix& mb = nodes_[n.b].value();
        if (wants(n.a)) {
          DenseMatrix& ga = ensure_grad(n.a);
          for (int i = 0; i < ma.rows; ++i)
            for (int j = 0; j < ma.cols; ++j) ga(i, j) += g(i, j);
        }
        if (wants(n.b)) {
          DenseMatrix& gb = ensure_grad(n.b);
          for (int i = 0; i < mb.rows; ++i)
            for (int j = 0; j < mb.cols; ++j) gb(i, j) += g(i, ma.cols + j);
        }
        break;
      }
      case Op::kRowLog: {
        if (!wants(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value();
        DenseMatrix& ga = ensure_grad(n.a);
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] / x.v[i];
        break;
      }
      case Op::kClipMin: {
        if (!wants(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value();
        DenseMatrix& ga = ensure_grad(n.a);
        for (size_t i = 0; i < g.v.size(); ++i)
          if (x.v[i] >= n.c) ga.v[i] += g.v[i];
        break;
      }
      case Op::kScaleConst: {
        if (!wants(n.a)) break;
        DenseMatrix& ga = ensure_grad(n.a);
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * n.c;
        break;
      }
      case Op::kScaleBy: {
        const DenseMatrix& ma = nodes_[n.a].value();
        const double s = nodes_[n.b].value().v[0];
        if (wants(n.a)) {
          DenseMatrix& ga = ensure_grad(n.a);
          for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * s;
        }
        if (wants(n.b)) {
          double acc = 0.0;
          for (size_t i = 0; i < g.v.size(); ++i) acc += g.v[i] * ma.v[i];
          ensure_grad(n.b).v[0] += acc;
        }
        break;
      }
      case Op::kReciprocal: {
        if (!wants(n.a)) break;
        const double y = n.owned.v[0];
        ensure_grad(n.a).v[0] += -g.v[0] * y * y;
        break;
      }
      case Op::kSumAll: {
        if (!wants(n.a)) break;
        DenseMatrix& ga = ensure_grad(n.a);
        const double gs = g.v[0];
        for (auto& x : ga.v) x += gs;
        break;
      }
      case Op::kSumSq: {
        if (!wants(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value();
        DenseMatrix& ga = ensure_grad(n.a);
        const double gs = g.v[0];
        for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += 2.0 * x.v[i] * gs;
        break;
      }
      case Op::kRowSoftmax: {
        if (!wants(n.a)) break;
        const DenseMatrix& y = n.owned;
        DenseMatrix& ga = ensure_grad(n.a);
        for (int i = 0; i < y.rows; ++i) {
          const double* yi = y.row(i);
          const double* gi = g.row(i);
          double dot = 0.0;
          for (int j = 0; j < y.cols; ++j) dot += gi[j] * yi[j];
          double* out = ga.row(i);
          for (int j = 0; j < y.cols; ++j) out[j] += yi[j] * (gi[j] - dot);
        }
        break;
      }
      case Op::kRowL2Normalize: {
        if (!wants(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value();
        DenseMatrix& ga = ensure_grad(n.a);
        for (int i = 0; i < x.rows; ++i) {
          const double* xi = x.row(i);
          const double* gi = g.row(i);
          double nrm = 0.0;
          for (int j = 0; j < x.cols; ++j) nrm += xi[j] * xi[j];
          nrm = std::sqrt(nrm);
          double* out = ga.row(i);
          if (nrm == 0.0) continue;
          double dot = 0.0;
          for (int j = 0; j < x.cols; ++j) dot += gi[j] * xi[j] / nrm;
          for (int j = 0; j < x.cols; ++j) out[j] += (gi[j] - xi[j] / nrm * dot) / nrm;
        }
        break;
      }
      case Op::kNlGradient: {
        if (!wants(n.a)) break;
        const EdgeStructure& es = *n.es;
        DenseMatrix& ga = ensure_grad(n.a);
        const int k = g.cols;
        for (int i = 0; i < es.n; ++i) {
          double* gi = ga.row(i);
          for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
            const double w = es.weight[e];
            const double* ge = g.row(e);
            double* gj = ga.row(es.col_idx[e]);
            for (int c = 0; c < k; ++c) {
              gj[c] += w * ge[c];
              gi[c] -= w * ge[c];
            }
          }
        }
        break;
      }
      case Op::kNlDivergence: {
        if (!wants(n.a)) break;
        const EdgeStructure& es = *n.es;
        DenseMatrix& gv = ensure_grad(n.a);
        const int k = g.cols;
        for (int i = 0; i < es.n; ++i) {
          const double* gi = g.row(i);
          for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
            const double w = es.weight[e];
            double* ge = gv.row(e);
            double* gt = gv.row(es.transpose_slot[e]);
            for (int c = 0; c < k; ++c) {
              ge[c] += w * gi[c];
              gt[c] -= w * gi[c];
            }
          }
        }
        break;
      }
      case Op::kProjectRows:
        pull_project(n);
        break;
      case Op::kNeighborMax: {
        if (!wants(n.a)) break;
        DenseMatrix& gm = ensure_grad(n.a);
        const int k = g.cols;
        for (int i = 0; i < g.rows; ++i) {
          const int* arg = n.iaux.data() + static_cast<size_t>(i) * k;
          const double* gi = g.row(i);
          for (int c = 0; c < k; ++c)
            if (arg[c] >= 0) gm(arg[c], c) += gi[c];
        }
        break;
      }
    }
  }

  void pull_project(Node& n) {
    if (!wants(n.a)) return;
    const EdgeStructure& es = *n.es;
    const DenseMatrix& x = nodes_[n.a].value();
    const DenseMatrix& g = n.grad;
    DenseMatrix& gx = ensure_grad(n.a);
    const int k = x.cols;
    for (int c = 0; c < k; ++c) {
      if (n.flag) {
        // global variant: scaled rows share the divisor max_norm, which is a
        // function of the argmax row only
        double max_norm = 0.0;
        int arg = -1;
        for (int j = 0; j < es.n; ++j) {
          const double nrm = block_norm(es, x, j, c);
          if (nrm > max_norm) {
            max_norm = nrm;
            arg = j;
          }
        }
        if (max_norm <= 1.0) {
          for (int j = 0; j < es.n; ++j)
            for (int e = es.row_ptr[j]; e < es.row_ptr[static_cast<size_t>(j) + 1]; ++e)
              gx(e, c) += g(e, c);
          continue;
        }
        double coupled = 0.0;  // sum over scaled rows of <g_row, x_row>
        for (int j = 0; j < es.n; ++j) {
          const bool scaled = block_norm(es, x, j, c) > 1.0;
          for (int e = es.row_ptr[j]; e < es.row_ptr[static_cast<size_t>(j) + 1]; ++e) {
            if (scaled) {
              gx(e, c) += g(e, c) / max_norm;
              coupled += g(e, c) * x(e, c);
            } else {
              gx(e, c) += g(e, c);
            }
          }
        }
        for (int e = es.row_ptr[arg]; e < es.row_ptr[static_cast<size_t>(arg) + 1]; ++e)
          gx(e, c) -= coupled / (max_norm * max_norm) * x(e, c) / max_norm;
      } else {
        for (int j = 0; j < es.n; ++j) {
          const double nrm = block_norm(es, x, j, c);
          const int begin = es.row_ptr[j], end = es.row_ptr[static_cast<size_t>(j) + 1];
          if (nrm <= 1.0) {
            for (int e = begin; e < end; ++e) gx(e, c) += g(e, c);
          } else {
            double dot = 0.0;
            for (int e = begin; e < end; ++e) dot += g(e, c) * x(e, c) / nrm;
            for (int e = begin; e < end; ++e)
              gx(e, c) += (g(e, c) - x(e, c) / nrm * dot) / nrm;
          }
        }
      }
    }
  }

  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

}  // namespace tvgnn
