#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tvgnn/common.hpp"
#include "tvgnn/dense.hpp"
#include "tvgnn/graph.hpp"
#include "tvgnn/models.hpp"
#include "tvgnn/regsoftmax.hpp"
#include "tvgnn/rng.hpp"
#include "tvgnn/tape.hpp"

namespace tvgnn {

struct Split {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

struct SplitSpec {
  enum class Mode { kPerClass, kFraction };
  Mode mode = Mode::kPerClass;
  int train_per_class = 20;
  int val_per_class = 30;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
};

// Draws a train/val/test split. Per-class mode samples fixed counts from each
// class; fraction mode samples floor(n * fraction) nodes for train and val
// and sends the remainder to test. Every subset must end up non-empty.
inline Split make_split(const std::vector<int>& labels, int num_classes, const SplitSpec& spec,
                        Rng& rng) {
  const int n = static_cast<int>(labels.size());
  Split split;
  if (spec.mode == SplitSpec::Mode::kPerClass) {
    require(spec.train_per_class >= 1 && spec.val_per_class >= 0,
            "make_split: per-class counts must be positive");
    std::vector<std::vector<int>> members(static_cast<size_t>(num_classes));
    for (int i = 0; i < n; ++i) {
      require(labels[i] >= 0 && labels[i] < num_classes, "make_split: label out of range");
      members[labels[i]].push_back(i);
    }
    for (int c = 0; c < num_classes; ++c) {
      auto& m = members[c];
      const int need = spec.train_per_class + spec.val_per_class;
      require(static_cast<int>(m.size()) >= need,
              "make_split: class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                  " nodes, needs " + std::to_string(need));
      rng.shuffle(m);
      for (int i = 0; i < static_cast<int>(m.size()); ++i) {
        if (i < spec.train_per_class)
          split.train.push_back(m[i]);
        else if (i < need)
          split.val.push_back(m[i]);
        else
          split.test.push_back(m[i]);
      }
    }
  } else {
    require(spec.train_fraction > 0.0 && spec.val_fraction >= 0.0 &&
                spec.train_fraction + spec.val_fraction < 1.0,
            "make_split: fractions must be positive and sum below 1");
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    const int n_train = static_cast<int>(std::floor(spec.train_fraction * n));
    const int n_val = static_cast<int>(std::floor(spec.val_fraction * n));
    split.train.assign(order.begin(), order.begin() + n_train);
    split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    split.test.assign(order.begin() + n_train + n_val, order.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  require(!split.train.empty() && !split.val.empty() && !split.test.empty(),
          "make_split: split is infeasible for " + std::to_string(n) + " nodes (" +
              std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) + "/" +
              std::to_string(split.test.size()) + ")");
  return split;
}

// Fraction of `nodes` whose argmax row of `probs` matches the label. Argmax
// ties resolve to the smallest column.
inline double accuracy(const DenseMatrix& probs, const std::vector<int>& labels,
                       const std::vector<int>& nodes) {
  require(!nodes.empty(), "accuracy: empty node set");
  int correct = 0;
  for (int i : nodes) {
    const double* r = probs.row(i);
    int arg = 0;
    for (int j = 1; j < probs.cols; ++j)
      if (r[j] > r[arg]) arg = j;
    if (arg == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

// Summed (not averaged) cross-entropy of the labeled nodes, with the
// probabilities clipped at 1e-12 before the log.
inline Value cross_entropy_loss(Tape& t, Value probs, const std::vector<int>& labels,
                                const std::vector<int>& nodes) {
  require(!nodes.empty(), "cross_entropy_loss: empty node set");
  const DenseMatrix& p = t.val(probs);
  DenseMatrix mask = DenseMatrix::zeros(p.rows, p.cols);
  for (int i : nodes) {
    require(i >= 0 && i < p.rows, "cross_entropy_loss: node " + std::to_string(i) +
                                      " out of range");
    require(labels[i] >= 0 && labels[i] < p.cols, "cross_entropy_loss: label out of range");
    mask(i, labels[i]) = 1.0;
  }
  const Value picked = t.hadamard_const(t.row_log(t.clip_min(probs, 1e-12)), std::move(mask));
  return t.scale_const(t.sum_all(picked), -1.0);
}

// Adam with a per-parameter learning rate and optional post-step lower
// clamps. Frozen parameters are skipped entirely.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Parameter*> params, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    state_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      state_[i].m = DenseMatrix::zeros(params_[i]->value.rows, params_[i]->value.cols);
      state_[i].v = state_[i].m;
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      if (!p.learnable) continue;
      require(p.grad.same_shape(p.value), "AdamOptimizer: missing gradient for " + p.name);
      DenseMatrix& m = state_[i].m;
      DenseMatrix& v = state_[i].v;
      for (size_t j = 0; j < p.value.v.size(); ++j) {
        const double g = p.grad.v[j];
        m.v[j] = beta1_ * m.v[j] + (1.0 - beta1_) * g;
        v.v[j] = beta2_ * v.v[j] + (1.0 - beta2_) * g * g;
        p.value.v[j] -= p.lr * (m.v[j] / bc1) / (std::sqrt(v.v[j] / bc2) + eps_);
      }
      if (p.has_clamp_min)
        for (auto& x : p.value.v) x = std::max(x, p.clamp_min);
    }
  }

 private:
  struct State {
    DenseMatrix m, v;
  };
  std::vector<Parameter*> params_;
  std::vector<State> state_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainConfig {
  int max_epochs = 10000;
  int patience = 50;
  bool strict_patience = false;  // reset the patience window on loss improvement only
  int invariant_every = 10;      // check iteration invariants every N epochs (0 = off)
};

struct RunResult {
  bool failed = false;
  std::string failure_reason;
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double test_acc = 0.0;
  double test_loss = 0.0;
  double train_seconds = 0.0;
  // learned iteration knobs at the restored best epoch (NaN when unregularized)
  double tau = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline std::vector<Parameter*> all_params(GnnModel& model, RegSoftmaxParams* reg) {
  std::vector<Parameter*> ps = model.parameters();
  if (reg) {
    ps.push_back(&reg->tau);
    ps.push_back(&reg->lambda);
    ps.push_back(&reg->epsilon);
  }
  return ps;
}

}  // namespace detail

// One full training run: Adam on the summed cross-entropy of the train
// nodes (plus the first-layer decay penalty), early stopping on the
// validation set, restoration of the best-validation-accuracy weights, and a
// final test evaluation. When `reg` is given the class probabilities come
// from the regularized softmax over `es`; otherwise from the plain row
// softmax. The patience window resets when validation loss or accuracy
// improves (loss only in strict mode); the restored epoch is the best by
// validation accuracy with loss as the tiebreak.
inline RunResult train_run(GnnModel& model, RegSoftmaxParams* reg, const EdgeStructure* es,
                           const Graph& g, const Split& split, const TrainConfig& tc,
                           Rng& rng) {
  require(!reg || es, "train_run: regularized softmax needs an edge structure");
  require(tc.max_epochs >= 1, "train_run: max_epochs must be positive");
  require(tc.patience >= 1, "train_run: patience must be positive");

  const std::vector<Parameter*> params = detail::all_params(model, reg);
  AdamOptimizer opt(params);

  RunResult res;
  std::vector<DenseMatrix> best_values;
  double window_val_loss = std::numeric_limits<double>::infinity();
  double window_val_acc = -1.0;
  int wait = 0;

  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    // Anything thrown inside an epoch (softmax rejecting non-finite logits,
    // an invariant violation, ...) marks the run as failed instead of
    // propagating: one diverged run must not take down a whole experiment.
    try {
      {
        Tape t;
        const Value logits = model.logits(t, /*training=*/true, rng);
        const Value probs =
            reg ? reg_softmax_forward(t, *es, logits, *reg).probs : t.row_softmax(logits);
        Value loss = cross_entropy_loss(t, probs, g.labels, split.train);
        const Value penalty = model.decay_penalty(t);
        if (penalty.valid()) loss = t.add(loss, penalty);
        const double loss_value = t.val(loss).scalar_value();
        if (!std::isfinite(loss_value)) {
          res.failed = true;
          res.failure_reason = "non-finite training loss at epoch " + std::to_string(epoch);
          break;
        }
        t.backward(loss);
        opt.step();
        res.epochs_run = epoch;
      }

      Tape t;
      const Value logits = model.logits(t, /*training=*/false, rng);
      if (!all_finite(t.val(logits))) {
        res.failed = true;
        res.failure_reason = "non-finite logits at epoch " + std::to_string(epoch);
        break;
      }
      const RegSoftmaxResult rs =
          reg ? reg_softmax_forward(t, *es, logits, *reg)
              : RegSoftmaxResult{t.row_softmax(logits), Value{}};
      const DenseMatrix& probs = t.val(rs.probs);
      if (tc.invariant_every > 0 && epoch % tc.invariant_every == 0)
        require_reg_invariants(es ? *es : EdgeStructure{}, probs,
                               rs.eta.valid() ? &t.val(rs.eta) : nullptr);
      const double val_loss =
          t.val(cross_entropy_loss(t, rs.probs, g.labels, split.val)).scalar_value();
      const double val_acc = accuracy(probs, g.labels, split.val);

      if (val_acc > res.best_val_acc ||
          (val_acc == res.best_val_acc && val_loss < res.best_val_loss)) {
        res.best_val_acc = val_acc;
        res.best_val_loss = val_loss;
        res.best_epoch = epoch;
        best_values.clear();
        for (const Parameter* p : params) best_values.push_back(p->value);
      }

      const bool improved = tc.strict_patience
                                ? val_loss < window_val_loss
                                : (val_loss < window_val_loss || val_acc > window_val_acc);
      window_val_loss = std::min(window_val_loss, val_loss);
      window_val_acc = std::max(window_val_acc, val_acc);
      if (improved)
        wait = 0;
      else if (++wait >= tc.patience)
        break;
    } catch (const Error& e) {
      res.failed = true;
      res.failure_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
  }
  res.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!best_values.empty())
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  if (res.best_epoch < 0 && !res.failed) {
    res.failed = true;
    res.failure_reason = "no epoch completed";
  }
  if (res.failed) return res;

  Tape t;
  const Value logits = model.logits(t, /*training=*/false, rng);
  const Value probs =
      reg ? reg_softmax_forward(t, *es, logits, *reg).probs : t.row_softmax(logits);
  res.test_acc = accuracy(t.val(probs), g.labels, split.test);
  res.test_loss = t.val(cross_entropy_loss(t, probs, g.labels, split.test)).scalar_value();
  if (reg) {
    res.tau = reg->tau.scalar_value();
    res.lambda = reg->lambda.scalar_value();
    res.epsilon = reg->epsilon.scalar_value();
  }
  return res;
}

}  // namespace tvgnn
