#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "tvgnn/gradcheck.hpp"
#include "tvgnn/models.hpp"
#include "tvgnn/train.hpp"

using namespace tvgnn;

namespace {

// Circulant graph: node i connects to i +- 1..half (mod n), giving a
// 2*half-regular graph.
Graph circulant(int n, int half, int num_classes) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= half; ++k) edges.emplace_back(i, (i + k) % n);
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i % num_classes;
  return Graph::create(n, edges, labels, num_classes);
}

// 3-regular circulant: i +- 1 and the antipode i + n/2 (n even).
Graph cubic_ring(int n, int num_classes) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    edges.emplace_back(i, (i + 1) % n);
    if (i < n / 2) edges.emplace_back(i, i + n / 2);
  }
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i % num_classes;
  return Graph::create(n, edges, labels, num_classes);
}

DenseMatrix integer_matrix(Rng& rng, int rows, int cols, int lo, int hi) {
  DenseMatrix m = DenseMatrix::zeros(rows, cols);
  for (auto& x : m.v)
    x = static_cast<double>(lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1))));
  return m;
}

Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < g.n; ++i)
    for (int e = g.adj.row_ptr[i]; e < g.adj.row_ptr[i + 1]; ++e) {
      const int j = g.adj.col_idx[e];
      if (i < j) edges.emplace_back(perm[i], perm[j]);
    }
  std::vector<int> labels(static_cast<size_t>(g.n));
  for (int i = 0; i < g.n; ++i) labels[perm[i]] = g.labels[i];
  return Graph::create(g.n, edges, labels, g.num_classes);
}

DenseMatrix permute_rows(const DenseMatrix& m, const std::vector<int>& perm) {
  DenseMatrix out = DenseMatrix::zeros(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(perm[i], j) = m(i, j);
  return out;
}

}  // namespace

TEST_CASE("model kind names round-trip") {
  for (ModelKind k : {ModelKind::kGcn, ModelKind::kSageMean, ModelKind::kSageMaxPool})
    REQUIRE(parse_model_kind(model_kind_name(k)) == k);
  REQUIRE_THROWS_AS(parse_model_kind("transformer"), Error);
  REQUIRE(ModelConfig::defaults(ModelKind::kGcn).hidden == 16);
  REQUIRE(ModelConfig::defaults(ModelKind::kSageMean).hidden == 64);
  REQUIRE(ModelConfig::defaults(ModelKind::kSageMaxPool).hidden == 64);
}

TEST_CASE("glorot initialization: bounds, moments, determinism") {
  Rng rng(3);
  const int rows = 200, cols = 300;
  const DenseMatrix w = glorot_init(rows, cols, rng);
  const double a = std::sqrt(6.0 / (rows + cols));
  double mean = 0.0, var = 0.0;
  for (double x : w.v) {
    REQUIRE(std::abs(x) < a);
    mean += x;
  }
  mean /= static_cast<double>(w.v.size());
  for (double x : w.v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.v.size());
  REQUIRE(std::abs(mean) < 3.0 * a / std::sqrt(3.0 * w.v.size()));
  REQUIRE(var == Catch::Approx(a * a / 3.0).epsilon(0.05));

  Rng r1(9), r2(9);
  REQUIRE(bitwise_equal(glorot_init(4, 5, r1), glorot_init(4, 5, r2)));
}

TEST_CASE("sparsify keeps exactly the nonzeros and products agree bitwise") {
  Rng rng(7);
  DenseMatrix x = testutil::random_matrix(rng, 10, 8);
  for (auto& v : x.v)
    if (std::abs(v) < 0.6) v = 0.0;  // make it sparse
  const SparseMatrix s = sparsify(x);
  int nonzeros = 0;
  for (double v : x.v)
    if (v != 0.0) ++nonzeros;
  REQUIRE(s.nnz() == nonzeros);
  REQUIRE(bitwise_equal(s.to_dense(), x));

  const DenseMatrix w = testutil::random_matrix(rng, 8, 3);
  DenseMatrix via_sparse, via_dense;
  s.multiply_into(w, via_sparse);
  matmul_into(x, w, via_dense);
  REQUIRE(bitwise_equal(via_sparse, via_dense));
}

TEST_CASE("sparse dropout only rescales stored entries") {
  Rng rng(11);
  DenseMatrix x = testutil::random_matrix(rng, 30, 30, 0.5, 1.5);
  for (auto& v : x.v)
    if (rng.uniform() < 0.5) v = 0.0;
  const SparseMatrix s = sparsify(x);
  Rng mask(42);
  const SparseMatrix dropped = dropout_sparse(s, 0.5, mask);
  REQUIRE(dropped.nnz() == s.nnz());  // pattern is preserved, values zeroed
  int kept = 0;
  for (size_t i = 0; i < dropped.values.size(); ++i) {
    const double v = dropped.values[i];
    if (v != 0.0) {
      REQUIRE(v == s.values[i] / 0.5);
      ++kept;
    }
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(s.nnz());
  REQUIRE(frac == Catch::Approx(0.5).margin(0.1));
  REQUIRE_THROWS_AS(dropout_sparse(s, 1.0, mask), Error);
}

TEST_CASE("model construction shapes per kind") {
  Rng rng(13);
  const Graph g = testutil::random_graph(rng, 12, 3, 0.3);
  const DenseMatrix x = testutil::random_matrix(rng, 12, 5);

  ModelConfig gcn = ModelConfig::defaults(ModelKind::kGcn);
  gcn.hidden = 7;
  GnnModel mg = GnnModel::create(gcn, g, x, rng);
  REQUIRE(mg.w0.value.rows == 5);
  REQUIRE(mg.w0.value.cols == 7);
  REQUIRE(mg.w1.value.rows == 7);
  REQUIRE(mg.w1.value.cols == 3);
  REQUIRE(mg.parameters().size() == 2);

  ModelConfig sm = ModelConfig::defaults(ModelKind::kSageMean);
  sm.hidden = 6;
  GnnModel ms = GnnModel::create(sm, g, x, rng);
  REQUIRE(ms.w0.value.rows == 10);  // concat(x, mean)
  REQUIRE(ms.w0.value.cols == 6);
  REQUIRE(ms.w1.value.rows == 12);  // concat(h, mean h)
  REQUIRE(ms.w1.value.cols == 3);
  REQUIRE(ms.parameters().size() == 2);

  ModelConfig mp = ModelConfig::defaults(ModelKind::kSageMaxPool);
  mp.hidden = 4;
  GnnModel mm = GnnModel::create(mp, g, x, rng);
  REQUIRE(mm.pool0.value.rows == 5);
  REQUIRE(mm.pool0.value.cols == 4);
  REQUIRE(mm.w0.value.rows == 9);  // concat(x, pooled)
  REQUIRE(mm.w0.value.cols == 4);
  REQUIRE(mm.pool1.value.rows == 4);
  REQUIRE(mm.pool1.value.cols == 4);
  REQUIRE(mm.w1.value.rows == 8);
  REQUIRE(mm.w1.value.cols == 3);
  REQUIRE(mm.parameters().size() == 4);

  REQUIRE_THROWS_AS(GnnModel::create(gcn, g, testutil::random_matrix(rng, 11, 5), rng), Error);
}

TEST_CASE("gcn forward equals the dense two-layer formula") {
  Rng rng(17);
  const Graph g = testutil::random_graph(rng, 9, 2, 0.4);
  const DenseMatrix x = testutil::random_matrix(rng, 9, 4);
  ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
  cfg.hidden = 5;
  GnnModel m = GnnModel::create(cfg, g, x, rng);

  Tape t;
  Rng unused(1);
  const DenseMatrix& got = t.val(m.logits(t, /*training=*/false, unused));

  const DenseMatrix ahat = renormalized_adjacency(g.adj).to_dense();
  DenseMatrix xw, axw, h, hw, ref;
  matmul_into(x, m.w0.value, xw);
  matmul_into(ahat, xw, axw);
  h = axw;
  for (auto& v : h.v) v = v > 0.0 ? v : 0.0;
  matmul_into(h, m.w1.value, hw);
  matmul_into(ahat, hw, ref);
  REQUIRE(max_abs_diff(got, ref) <= 1e-12);
}

TEST_CASE("sage-mean forward equals the dense aggregation formula") {
  Rng rng(19);
  const Graph g = testutil::random_graph(rng, 8, 2, 0.4);
  const DenseMatrix x = testutil::random_matrix(rng, 8, 3);
  for (bool l2 : {false, true}) {
    ModelConfig cfg = ModelConfig::defaults(ModelKind::kSageMean);
    cfg.hidden = 4;
    cfg.sage_l2_normalize = l2;
    Rng init(55);
    GnnModel m = GnnModel::create(cfg, g, x, init);

    Tape t;
    Rng unused(1);
    const DenseMatrix& got = t.val(m.logits(t, false, unused));

    const DenseMatrix p = row_normalize(g.adj).to_dense();
    auto agg_concat = [&](const DenseMatrix& in) {
      DenseMatrix mean;
      matmul_into(p, in, mean);
      DenseMatrix cc = DenseMatrix::zeros(in.rows, 2 * in.cols);
      for (int i = 0; i < in.rows; ++i)
        for (int j = 0; j < in.cols; ++j) {
          cc(i, j) = in(i, j);
          cc(i, in.cols + j) = mean(i, j);
        }
      return cc;
    };
    DenseMatrix h;
    matmul_into(agg_concat(x), m.w0.value, h);
    for (auto& v : h.v) v = v > 0.0 ? v : 0.0;
    if (l2)
      for (int i = 0; i < h.rows; ++i) {
        double nrm = 0.0;
        for (int j = 0; j < h.cols; ++j) nrm += h(i, j) * h(i, j);
        nrm = std::sqrt(nrm);
        if (nrm > 0.0)
          for (int j = 0; j < h.cols; ++j) h(i, j) /= nrm;
      }
    DenseMatrix ref;
    matmul_into(agg_concat(h), m.w1.value, ref);
    REQUIRE(max_abs_diff(got, ref) <= 1e-12);
  }
}

TEST_CASE("sage-maxpool forward equals a dense max-pooling oracle") {
  Rng rng(23);
  const Graph g = testutil::random_graph(rng, 8, 2, 0.4);
  const DenseMatrix x = testutil::random_matrix(rng, 8, 3);
  ModelConfig cfg = ModelConfig::defaults(ModelKind::kSageMaxPool);
  cfg.hidden = 4;
  Rng init(77);
  GnnModel m = GnnModel::create(cfg, g, x, init);

  Tape t;
  Rng unused(1);
  const DenseMatrix& got = t.val(m.logits(t, false, unused));

  const DenseMatrix adj = g.adj.to_dense();
  auto neigh_max = [&](const DenseMatrix& in) {
    DenseMatrix out = DenseMatrix::zeros(in.rows, in.cols);
    for (int i = 0; i < in.rows; ++i) {
      bool any = false;
      for (int j = 0; j < in.rows; ++j) {
        if (adj(i, j) == 0.0) continue;
        for (int c = 0; c < in.cols; ++c)
          out(i, c) = any ? std::max(out(i, c), in(j, c)) : in(j, c);
        any = true;
      }
    }
    return out;
  };
  auto concat = [](const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix cc = DenseMatrix::zeros(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
      for (int j = 0; j < a.cols; ++j) cc(i, j) = a(i, j);
      for (int j = 0; j < b.cols; ++j) cc(i, a.cols + j) = b(i, j);
    }
    return cc;
  };
  auto relu = [](DenseMatrix m_) {
    for (auto& v : m_.v) v = v > 0.0 ? v : 0.0;
    return m_;
  };
  DenseMatrix pooled0, h, pooled1, ref;
  matmul_into(x, m.pool0.value, pooled0);
  pooled0 = relu(pooled0);
  matmul_into(concat(x, neigh_max(pooled0)), m.w0.value, h);
  h = relu(h);
  matmul_into(h, m.pool1.value, pooled1);
  pooled1 = relu(pooled1);
  matmul_into(concat(h, neigh_max(pooled1)), m.w1.value, ref);
  REQUIRE(max_abs_diff(got, ref) <= 1e-12);
}

TEST_CASE("gcn eval logits are exactly permutation equivariant on a dyadic graph") {
  const int n = 8;
  const Graph g = cubic_ring(n, 2);  // degree 3 + self-loop -> weights are 1/4
  Rng rng(31);
  const DenseMatrix x = integer_matrix(rng, n, 3, 0, 3);
  const DenseMatrix w0 = integer_matrix(rng, 3, 4, -2, 2);
  const DenseMatrix w1 = integer_matrix(rng, 4, 2, -2, 2);

  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[i] = (3 * i + 1) % n;

  ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
  cfg.hidden = 4;
  Rng init(1);
  GnnModel m = GnnModel::create(cfg, g, x, init);
  m.w0.value = w0;
  m.w1.value = w1;
  Rng init2(1);
  GnnModel mp = GnnModel::create(cfg, permute_graph(g, perm), permute_rows(x, perm), init2);
  mp.w0.value = w0;
  mp.w1.value = w1;

  Tape t1, t2;
  Rng u1(1), u2(1);
  const DenseMatrix& base = t1.val(m.logits(t1, false, u1));
  const DenseMatrix& permuted = t2.val(mp.logits(t2, false, u2));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) REQUIRE(permuted(perm[i], c) == base(i, c));
}

TEST_CASE("sage-mean eval logits are exactly permutation equivariant on a dyadic graph") {
  const int n = 8;
  const Graph g = circulant(n, 2, 2);  // 4-regular -> mean weights are 1/4
  Rng rng(37);
  const DenseMatrix x = integer_matrix(rng, n, 3, 0, 3);
  const DenseMatrix w0 = integer_matrix(rng, 6, 4, -2, 2);
  const DenseMatrix w1 = integer_matrix(rng, 8, 2, -2, 2);

  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[i] = (5 * i + 2) % n;

  ModelConfig cfg = ModelConfig::defaults(ModelKind::kSageMean);
  cfg.hidden = 4;
  Rng i1(1), i2(1);
  GnnModel m = GnnModel::create(cfg, g, x, i1);
  m.w0.value = w0;
  m.w1.value = w1;
  GnnModel mp = GnnModel::create(cfg, permute_graph(g, perm), permute_rows(x, perm), i2);
  mp.w0.value = w0;
  mp.w1.value = w1;

  Tape t1, t2;
  Rng u1(1), u2(1);
  const DenseMatrix& base = t1.val(m.logits(t1, false, u1));
  const DenseMatrix& permuted = t2.val(mp.logits(t2, false, u2));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) REQUIRE(permuted(perm[i], c) == base(i, c));
}

TEST_CASE("sage-maxpool eval logits are exactly permutation equivariant") {
  Rng rng(41);
  const Graph g = testutil::random_graph(rng, 9, 2, 0.4);
  const DenseMatrix x = testutil::random_matrix(rng, 9, 3);
  std::vector<int> perm = {4, 7, 0, 8, 2, 6, 1, 3, 5};

  ModelConfig cfg = ModelConfig::defaults(ModelKind::kSageMaxPool);
  cfg.hidden = 4;
  Rng i1(2), i2(2);
  GnnModel m = GnnModel::create(cfg, g, x, i1);
  GnnModel mp = GnnModel::create(cfg, permute_graph(g, perm), permute_rows(x, perm), i2);
  mp.pool0.value = m.pool0.value;
  mp.w0.value = m.w0.value;
  mp.pool1.value = m.pool1.value;
  mp.w1.value = m.w1.value;

  Tape t1, t2;
  Rng u1(1), u2(1);
  const DenseMatrix& base = t1.val(m.logits(t1, false, u1));
  const DenseMatrix& permuted = t2.val(mp.logits(t2, false, u2));
  for (int i = 0; i < 9; ++i)
    for (int c = 0; c < 2; ++c) REQUIRE(permuted(perm[i], c) == base(i, c));
}

TEST_CASE("accuracy counts argmax hits with ties to the smaller class") {
  DenseMatrix p = DenseMatrix::zeros(3, 2);
  p(0, 0) = 0.5, p(0, 1) = 0.5;  // tie -> class 0
  p(1, 0) = 0.2, p(1, 1) = 0.8;
  p(2, 0) = 0.9, p(2, 1) = 0.1;
  REQUIRE(accuracy(p, {0, 1, 1}, {0, 1, 2}) == Catch::Approx(2.0 / 3.0));
  REQUIRE(accuracy(p, {0, 1, 1}, {0, 1}) == 1.0);
  REQUIRE(accuracy(p, {1, 1, 1}, {0}) == 0.0);  // tie did not go to class 1
  REQUIRE_THROWS_AS(accuracy(p, {0, 1, 1}, {}), Error);
}

TEST_CASE("cross entropy: hand values, clipping, and gradients") {
  Tape t;
  DenseMatrix p = DenseMatrix::zeros(2, 2);
  p(0, 0) = 0.5, p(0, 1) = 0.5;
  p(1, 0) = 0.25, p(1, 1) = 0.75;
  const Value vp = t.constant(p);
  const double l0 = t.val(cross_entropy_loss(t, vp, {0, 1}, {0})).scalar_value();
  REQUIRE(l0 == Catch::Approx(std::log(2.0)).epsilon(1e-14));
  const double l01 = t.val(cross_entropy_loss(t, vp, {0, 1}, {0, 1})).scalar_value();
  REQUIRE(l01 == Catch::Approx(std::log(2.0) + std::log(4.0 / 3.0)).epsilon(1e-14));

  // probabilities below the clip floor contribute -log(1e-12)
  DenseMatrix tiny = DenseMatrix::zeros(1, 2);
  tiny(0, 0) = 1e-15, tiny(0, 1) = 1.0 - 1e-15;
  const double lc =
      t.val(cross_entropy_loss(t, t.constant(tiny), {0}, {0})).scalar_value();
  REQUIRE(lc == Catch::Approx(-std::log(1e-12)).epsilon(1e-14));

  REQUIRE_THROWS_AS(cross_entropy_loss(t, vp, {0, 1}, {}), Error);
  REQUIRE_THROWS_AS(cross_entropy_loss(t, vp, {0, 5}, {1}), Error);   // bad label
  REQUIRE_THROWS_AS(cross_entropy_loss(t, vp, {0, 1}, {7}), Error);   // bad node

  // gradients through softmax + cross entropy
  Rng rng(43);
  Parameter o = Parameter::matrix("o", testutil::random_matrix(rng, 4, 3));
  auto f = [&](bool with_grad) {
    Tape tt;
    const Value loss =
        cross_entropy_loss(tt, tt.row_softmax(tt.param(o)), {0, 1, 2, 0}, {0, 1, 3});
    if (with_grad) tt.backward(loss);
    return tt.val(loss).scalar_value();
  };
  REQUIRE(worst_gradient_error(gradient_check(f, {&o})) < 1e-8);
}

TEST_CASE("adam: convergence, per-parameter rates, clamps, frozen params") {
  SECTION("quadratic bowl") {
    Parameter w = Parameter::scalar("w", 0.0, 0.1);
    AdamOptimizer opt({&w});
    for (int i = 0; i < 400; ++i) {
      Tape t;
      const Value loss = t.sum_sq(t.sub(t.param(w), t.constant(DenseMatrix::scalar(3.0))));
      t.backward(loss);
      opt.step();
    }
    REQUIRE(w.scalar_value() == Catch::Approx(3.0).margin(0.05));
  }

  SECTION("first step size equals the learning rate") {
    Parameter a = Parameter::scalar("a", 1.0, 0.01);
    Parameter b = Parameter::scalar("b", 1.0, 0.2);
    AdamOptimizer opt({&a, &b});
    Tape t;
    const Value loss = t.add(t.sum_all(t.param(a)), t.sum_all(t.param(b)));
    t.backward(loss);
    opt.step();
    REQUIRE(a.scalar_value() == Catch::Approx(1.0 - 0.01).epsilon(1e-6));
    REQUIRE(b.scalar_value() == Catch::Approx(1.0 - 0.2).epsilon(1e-6));
  }

  SECTION("post-step clamp") {
    Parameter w = Parameter::scalar("w", 0.55, 0.1);
    w.set_clamp_min(0.5);
    AdamOptimizer opt({&w});
    for (int i = 0; i < 20; ++i) {
      Tape t;
      const Value loss = t.sum_all(t.param(w));
      t.backward(loss);
      opt.step();
    }
    REQUIRE(w.scalar_value() == 0.5);
  }

  SECTION("frozen parameters never move") {
    Parameter w = Parameter::scalar("w", 2.0, 0.1);
    w.learnable = false;
    Parameter live = Parameter::scalar("live", 2.0, 0.1);
    AdamOptimizer opt({&w, &live});
    Tape t;
    const Value loss = t.add(t.sum_sq(t.param(w)), t.sum_sq(t.param(live)));
    t.backward(loss);
    opt.step();
    REQUIRE(w.scalar_value() == 2.0);
    REQUIRE(live.scalar_value() != 2.0);
  }

  SECTION("a zero gradient leaves the parameter in place") {
    Parameter w = Parameter::scalar("w", 1.0, 0.1);
    AdamOptimizer opt({&w});
    opt.step();  // grad was allocated as zeros at construction
    REQUIRE(w.scalar_value() == 1.0);
  }

  SECTION("a parameter whose gradient shape is stale is rejected") {
    Parameter w = Parameter::scalar("w", 1.0, 0.1);
    w.value = DenseMatrix::zeros(2, 2);  // resized behind the optimizer's back
    AdamOptimizer opt({&w});
    REQUIRE_THROWS_AS(opt.step(), Error);
  }
}

TEST_CASE("splits: per-class counts, fraction arithmetic, determinism") {
  SECTION("per-class composition") {
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 50 + 5 * c; ++i) labels.push_back(c);
    Rng rng(5);
    const Split s = make_split(labels, 3, SplitSpec{}, rng);
    REQUIRE(s.train.size() == 60);
    REQUIRE(s.val.size() == 90);
    REQUIRE(s.test.size() == labels.size() - 150);
    std::vector<int> train_per_class(3, 0), val_per_class(3, 0);
    for (int i : s.train) ++train_per_class[labels[i]];
    for (int i : s.val) ++val_per_class[labels[i]];
    for (int c = 0; c < 3; ++c) {
      REQUIRE(train_per_class[c] == 20);
      REQUIRE(val_per_class[c] == 30);
    }
    // disjoint and sorted
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    REQUIRE(all.size() == labels.size());
    REQUIRE(std::is_sorted(s.train.begin(), s.train.end()));
    REQUIRE(std::is_sorted(s.val.begin(), s.val.end()));
    REQUIRE(std::is_sorted(s.test.begin(), s.test.end()));
  }

  SECTION("a class below the quota is an error") {
    std::vector<int> labels(49, 0);
    labels.insert(labels.end(), 60, 1);
    Rng rng(5);
    REQUIRE_THROWS_WITH(make_split(labels, 2, SplitSpec{}, rng),
                        Catch::Matchers::ContainsSubstring("class 0"));
  }

  SECTION("fraction mode floors and sends the remainder to test") {
    std::vector<int> labels(183);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 5);
    SplitSpec spec;
    spec.mode = SplitSpec::Mode::kFraction;
    Rng rng(5);
    const Split s = make_split(labels, 5, spec, rng);
    REQUIRE(s.train.size() == 109);
    REQUIRE(s.val.size() == 36);
    REQUIRE(s.test.size() == 38);
  }

  SECTION("determinism and seed sensitivity") {
    std::vector<int> labels(400);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
    Rng r1(9), r2(9), r3(10);
    const Split a = make_split(labels, 2, SplitSpec{}, r1);
    const Split b = make_split(labels, 2, SplitSpec{}, r2);
    const Split c = make_split(labels, 2, SplitSpec{}, r3);
    REQUIRE(a.train == b.train);
    REQUIRE(a.val == b.val);
    REQUIRE(a.test == b.test);
    REQUIRE(a.train != c.train);
  }
}

TEST_CASE("training learns the planted two-community labels") {
  Rng rng(47);
  const testutil::SyntheticData d = testutil::planted_two_communities(rng, 10, 0.6, 0.05, 0.05);
  SplitSpec spec;
  spec.train_per_class = 3;
  spec.val_per_class = 3;
  Rng split_rng(1);
  const Split split = make_split(d.graph.labels, 2, spec, split_rng);

  ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
  cfg.hidden = 8;
  Rng run_rng(2);
  GnnModel model = GnnModel::create(cfg, d.graph, d.features, run_rng);
  TrainConfig tc;
  tc.max_epochs = 300;
  tc.patience = 50;
  const RunResult res = train_run(model, nullptr, nullptr, d.graph, split, tc, run_rng);
  REQUIRE_FALSE(res.failed);
  REQUIRE(res.best_epoch >= 1);
  REQUIRE(res.best_val_acc >= 0.9);
  REQUIRE(res.test_acc >= 0.9);
  REQUIRE(std::isnan(res.tau));  // unregularized runs record no knobs
}

TEST_CASE("training is bitwise deterministic in its seeds") {
  Rng rng(53);
  const testutil::SyntheticData d = testutil::planted_two_communities(rng, 8, 0.5, 0.1, 0.1);
  SplitSpec spec;
  spec.train_per_class = 3;
  spec.val_per_class = 2;

  auto run_once = [&](uint64_t seed) {
    Rng split_rng(derive_seed(seed, 0));
    const Split split = make_split(d.graph.labels, 2, spec, split_rng);
    ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
    cfg.hidden = 6;
    Rng run_rng(derive_seed(seed, 0, 0));
    GnnModel model = GnnModel::create(cfg, d.graph, d.features, run_rng);
    TrainConfig tc;
    tc.max_epochs = 60;
    tc.patience = 20;
    return train_run(model, nullptr, nullptr, d.graph, split, tc, run_rng);
  };
  const RunResult a = run_once(7), b = run_once(7), c = run_once(8);
  REQUIRE(a.test_acc == b.test_acc);
  REQUIRE(a.test_loss == b.test_loss);
  REQUIRE(a.best_val_loss == b.best_val_loss);
  REQUIRE(a.epochs_run == b.epochs_run);
  REQUIRE(a.best_epoch == b.best_epoch);
  const bool differs = a.test_loss != c.test_loss || a.epochs_run != c.epochs_run ||
                       a.best_val_loss != c.best_val_loss;
  REQUIRE(differs);
}

TEST_CASE("a flat validation signal stops after exactly patience epochs") {
  // zero features freeze the logits at zero, so nothing ever improves after
  // the first evaluation
  const Graph g = Graph::create(8, {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {5, 6}, {6, 7}, {3, 4}},
                                {0, 1, 0, 1, 0, 1, 0, 1}, 2);
  const DenseMatrix x = DenseMatrix::zeros(8, 3);
  SplitSpec spec;
  spec.train_per_class = 2;
  spec.val_per_class = 1;
  Rng split_rng(3);
  const Split split = make_split(g.labels, 2, spec, split_rng);
  for (bool strict : {false, true}) {
    ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
    cfg.hidden = 4;
    Rng rng(4);
    GnnModel model = GnnModel::create(cfg, g, x, rng);
    TrainConfig tc;
    tc.max_epochs = 500;
    tc.patience = 7;
    tc.strict_patience = strict;
    const RunResult res = train_run(model, nullptr, nullptr, g, split, tc, rng);
    REQUIRE_FALSE(res.failed);
    REQUIRE(res.best_epoch == 1);
    REQUIRE(res.epochs_run == 8);  // 1 improvement + patience flat epochs
  }
}

TEST_CASE("numeric blowups mark the run failed instead of throwing") {
  Rng rng(59);
  const testutil::SyntheticData d = testutil::planted_two_communities(rng, 5, 0.6, 0.1, 0.1);
  SplitSpec spec;
  spec.train_per_class = 2;
  spec.val_per_class = 1;
  Rng split_rng(1);
  const Split split = make_split(d.graph.labels, 2, spec, split_rng);
  ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
  cfg.hidden = 4;
  Rng run_rng(2);
  GnnModel model = GnnModel::create(cfg, d.graph, d.features, run_rng);
  model.w0.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.max_epochs = 10;
  tc.patience = 5;
  const RunResult res = train_run(model, nullptr, nullptr, d.graph, split, tc, run_rng);
  REQUIRE(res.failed);
  REQUIRE_FALSE(res.failure_reason.empty());
  REQUIRE(res.best_epoch == -1);
}

TEST_CASE("regularized training maintains invariants and learns the knobs") {
  Rng rng(61);
  const testutil::SyntheticData d = testutil::planted_two_communities(rng, 8, 0.6, 0.05, 0.05);
  const EdgeStructure es = EdgeStructure::build(similarity_matrix(d.graph));
  SplitSpec spec;
  spec.train_per_class = 3;
  spec.val_per_class = 2;
  Rng split_rng(1);
  const Split split = make_split(d.graph.labels, 2, spec, split_rng);

  ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
  cfg.hidden = 6;
  Rng run_rng(2);
  GnnModel model = GnnModel::create(cfg, d.graph, d.features, run_rng);
  RegSoftmaxParams reg = RegSoftmaxParams::create(1.0, 3.0, 1.0);
  TrainConfig tc;
  tc.max_epochs = 80;
  tc.patience = 30;
  tc.invariant_every = 1;
  const RunResult res = train_run(model, &reg, &es, d.graph, split, tc, run_rng);
  REQUIRE_FALSE(res.failed);
  REQUIRE(res.test_acc >= 0.8);
  REQUIRE(std::isfinite(res.tau));
  REQUIRE(res.tau == reg.tau.scalar_value());
  REQUIRE(res.lambda == reg.lambda.scalar_value());
  REQUIRE(res.epsilon == reg.epsilon.scalar_value());
  // the optimizer actually moved the iteration knobs
  const bool moved = res.tau != 1.0 || res.lambda != 3.0 || res.epsilon != 1.0;
  REQUIRE(moved);
}

TEST_CASE("with lambda frozen at zero the regularized path reproduces the baseline") {
  Rng rng(67);
  const testutil::SyntheticData d = testutil::planted_two_communities(rng, 8, 0.5, 0.1, 0.05);
  const EdgeStructure es = EdgeStructure::build(similarity_matrix(d.graph));
  SplitSpec spec;
  spec.train_per_class = 3;
  spec.val_per_class = 2;

  for (int t_steps : {1, 3}) {
    auto make_model = [&] {
      ModelConfig cfg = ModelConfig::defaults(ModelKind::kGcn);
      cfg.hidden = 6;
      return cfg;
    };
    TrainConfig tc;
    tc.max_epochs = 40;
    tc.patience = 40;

    Rng split_rng(derive_seed(11, 0));
    const Split split = make_split(d.graph.labels, 2, spec, split_rng);

    Rng rng_base(derive_seed(11, 0, 0));
    GnnModel base = GnnModel::create(make_model(), d.graph, d.features, rng_base);
    const RunResult rb = train_run(base, nullptr, nullptr, d.graph, split, tc, rng_base);

    Rng rng_reg(derive_seed(11, 0, 0));
    GnnModel regm = GnnModel::create(make_model(), d.graph, d.features, rng_reg);
    RegSoftmaxParams reg = RegSoftmaxParams::create(0.5, 0.0, 1.0);
    reg.t_steps = t_steps;
    reg.tau.learnable = false;
    reg.lambda.learnable = false;
    reg.epsilon.learnable = false;
    const RunResult rr = train_run(regm, &reg, &es, d.graph, split, tc, rng_reg);

    REQUIRE_FALSE(rb.failed);
    REQUIRE_FALSE(rr.failed);
    REQUIRE(rb.test_acc == rr.test_acc);
    REQUIRE(rb.test_loss == rr.test_loss);
    REQUIRE(rb.best_val_loss == rr.best_val_loss);
    REQUIRE(rb.epochs_run == rr.epochs_run);
    REQUIRE(bitwise_equal(base.w0.value, regm.w0.value));
    REQUIRE(bitwise_equal(base.w1.value, regm.w1.value));
  }
}
