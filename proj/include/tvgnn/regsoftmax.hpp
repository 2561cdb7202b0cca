#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "tvgnn/common.hpp"
#include "tvgnn/dense.hpp"
#include "tvgnn/sparse.hpp"
#include "tvgnn/tape.hpp"

namespace tvgnn {

// Learnable knobs of the regularized softmax. tau is the dual ascent step,
// lambda the regularization weight, epsilon the softmax temperature. Each
// carries its own learning rate and a lower clamp applied after optimizer
// steps so the iteration stays well posed.
struct RegSoftmaxParams {
  Parameter tau;
  Parameter lambda;
  Parameter epsilon;
  int t_steps = 1;
  bool global_norm_projection = false;

  static RegSoftmaxParams create(double tau0, double lambda0, double epsilon0,
                                 double lr_tau = 0.01, double lr_lambda = 0.001,
                                 double lr_epsilon = 0.01) {
    require(tau0 > 0.0, "RegSoftmaxParams: tau must be positive, got " + std::to_string(tau0));
    require(lambda0 >= 0.0,
            "RegSoftmaxParams: lambda must be non-negative, got " + std::to_string(lambda0));
    require(epsilon0 > 0.0,
            "RegSoftmaxParams: epsilon must be positive, got " + std::to_string(epsilon0));
    RegSoftmaxParams p;
    p.tau = Parameter::scalar("tau", tau0, lr_tau);
    p.tau.set_clamp_min(1e-4);
    p.lambda = Parameter::scalar("lambda", lambda0, lr_lambda);
    p.lambda.set_clamp_min(0.0);
    p.epsilon = Parameter::scalar("epsilon", epsilon0, lr_epsilon);
    p.epsilon.set_clamp_min(1e-3);
    return p;
  }
};

struct RegSoftmaxResult {
  Value probs;  // nodes x classes, rows on the simplex
  Value eta;    // slots x classes dual field after the last step; invalid if t_steps == 0
};

// Differentiable primal-dual smoothing of the row softmax. Starting from
// A = softmax(O) and a zero dual field, each step ascends the dual
//   eta <- project(eta - tau * nl_gradient(A))
// and re-solves the primal in closed form
//   A <- softmax((O - lambda * nl_divergence(eta)) / epsilon).
// The dual field is re-initialized to zero on every call, so gradients flow
// through the unrolled steps only. With t_steps == 0 this is exactly the
// plain row softmax of O.
inline RegSoftmaxResult reg_softmax_forward(Tape& t, const EdgeStructure& es, Value o,
                                            RegSoftmaxParams& p) {
  require(p.t_steps >= 0,
          "reg_softmax: t_steps must be non-negative, got " + std::to_string(p.t_steps));
  require(p.tau.scalar_value() > 0.0, "reg_softmax: tau must be positive, got " +
                                          std::to_string(p.tau.scalar_value()));
  require(p.lambda.scalar_value() >= 0.0, "reg_softmax: lambda must be non-negative, got " +
                                              std::to_string(p.lambda.scalar_value()));
  require(p.epsilon.scalar_value() > 0.0, "reg_softmax: epsilon must be positive, got " +
                                              std::to_string(p.epsilon.scalar_value()));
  require(t.val(o).rows == es.n, "reg_softmax: logits have " + std::to_string(t.val(o).rows) +
                                     " rows for " + std::to_string(es.n) + " nodes");

  RegSoftmaxResult out;
  out.probs = t.row_softmax(o);
  if (p.t_steps == 0) return out;

  const Value neg_tau = t.scale_const(t.param(p.tau), -1.0);
  const Value lambda = t.param(p.lambda);
  const Value inv_epsilon = t.reciprocal(t.param(p.epsilon));
  for (int step = 0; step < p.t_steps; ++step) {
    const Value ascent = t.scale_by(t.nl_gradient(es, out.probs), neg_tau);
    const Value pre = out.eta.valid() ? t.add(out.eta, ascent) : ascent;
    out.eta = t.project_rows(es, pre, p.global_norm_projection);
    const Value smoothed = t.sub(o, t.scale_by(t.nl_divergence(es, out.eta), lambda));
    out.probs = t.row_softmax(t.scale_by(smoothed, inv_epsilon));
  }
  return out;
}

// --- plain (non-differentiable) counterparts, shared by diagnostics ---

inline DenseMatrix nl_gradient(const EdgeStructure& es, const DenseMatrix& a) {
  require(a.rows == es.n, "nl_gradient: node count " + std::to_string(a.rows) +
                              " does not match edge structure (" + std::to_string(es.n) + ")");
  DenseMatrix out(es.slots, a.cols);
  for (int i = 0; i < es.n; ++i) {
    const double* ai = a.row(i);
    for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
      const double* aj = a.row(es.col_idx[e]);
      double* r = out.row(e);
      for (int c = 0; c < a.cols; ++c) r[c] = es.weight[e] * (aj[c] - ai[c]);
    }
  }
  return out;
}

inline DenseMatrix nl_divergence(const EdgeStructure& es, const DenseMatrix& v) {
  require(v.rows == es.slots, "nl_divergence: slot count " + std::to_string(v.rows) +
                                  " does not match edge structure (" +
                                  std::to_string(es.slots) + ")");
  DenseMatrix out(es.n, v.cols);
  for (int i = 0; i < es.n; ++i) {
    double* r = out.row(i);
    for (int e = es.row_ptr[i]; e < es.row_ptr[static_cast<size_t>(i) + 1]; ++e) {
      const double* ve = v.row(e);
      const double* vt = v.row(es.transpose_slot[e]);
      for (int c = 0; c < v.cols; ++c) r[c] += es.weight[e] * (ve[c] - vt[c]);
    }
  }
  return out;
}

inline DenseMatrix project_unit_ball(const EdgeStructure& es, const DenseMatrix& v,
                                     bool global_norm = false) {
  require(v.rows == es.slots, "project_unit_ball: slot count " + std::to_string(v.rows) +
                                  " does not match edge structure (" +
                                  std::to_string(es.slots) + ")");
  auto block_norm = [&](int node, int cls) {
    double acc = 0.0;
    for (int e = es.row_ptr[node]; e < es.row_ptr[static_cast<size_t>(node) + 1]; ++e)
      acc += v(e, cls) * v(e, cls);
    return std::sqrt(acc);
  };
  DenseMatrix out = v;
  for (int c = 0; c < v.cols; ++c) {
    double divisor_cap = 0.0;
    if (global_norm) {
      for (int j = 0; j < es.n; ++j) divisor_cap = std::max(divisor_cap, block_norm(j, c));
      if (divisor_cap <= 1.0) continue;
    }
    for (int j = 0; j < es.n; ++j) {
      const double nrm = block_norm(j, c);
      if (nrm <= 1.0) continue;
      const double divisor = global_norm ? divisor_cap : nrm;
      for (int e = es.row_ptr[j]; e < es.row_ptr[static_cast<size_t>(j) + 1]; ++e)
        out(e, c) = v(e, c) / divisor;
    }
  }
  return out;
}

// Invariants the iteration maintains: probability rows sum to one, every
// probability is strictly positive, and each (node, class) block of the dual
// field sits inside the unit ball.
struct RegInvariantReport {
  double max_row_sum_err = 0.0;
  double min_prob = 1.0;
  double max_block_norm = 0.0;

  bool ok() const {
    return max_row_sum_err <= 1e-12 && min_prob > 0.0 && max_block_norm <= 1.0 + 1e-12;
  }
};

inline RegInvariantReport check_reg_invariants(const EdgeStructure& es, const DenseMatrix& probs,
                                               const DenseMatrix* eta) {
  RegInvariantReport rep;
  for (int i = 0; i < probs.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < probs.cols; ++j) {
      sum += probs(i, j);
      rep.min_prob = std::min(rep.min_prob, probs(i, j));
    }
    rep.max_row_sum_err = std::max(rep.max_row_sum_err, std::abs(sum - 1.0));
  }
  if (eta) {
    require(eta->rows == es.slots, "check_reg_invariants: dual field has " +
                                       std::to_string(eta->rows) + " slots, expected " +
                                       std::to_string(es.slots));
    for (int c = 0; c < eta->cols; ++c)
      for (int j = 0; j < es.n; ++j) {
        double acc = 0.0;
        for (int e = es.row_ptr[j]; e < es.row_ptr[static_cast<size_t>(j) + 1]; ++e)
          acc += (*eta)(e, c) * (*eta)(e, c);
        rep.max_block_norm = std::max(rep.max_block_norm, std::sqrt(acc));
      }
  }
  return rep;
}

inline void require_reg_invariants(const EdgeStructure& es, const DenseMatrix& probs,
                                   const DenseMatrix* eta) {
  const RegInvariantReport rep = check_reg_invariants(es, probs, eta);
  require(rep.ok(), "regularized softmax invariants violated: row sum err " +
                        std::to_string(rep.max_row_sum_err) + ", min prob " +
                        std::to_string(rep.min_prob) + ", max dual block norm " +
                        std::to_string(rep.max_block_norm));
}

}  // namespace tvgnn
