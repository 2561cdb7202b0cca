#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "tvgnn/common.hpp"
#include "tvgnn/dataio.hpp"
#include "tvgnn/graph.hpp"
#include "tvgnn/models.hpp"
#include "tvgnn/regsoftmax.hpp"
#include "tvgnn/rng.hpp"
#include "tvgnn/train.hpp"

namespace tvgnn {

enum class SimilarityKind { kNormalizedAdjacency, kIdeal };

// Per-class dense blocks of the ideal similarity grow quadratically with
// class size; refuse configurations whose edge-slot count would not fit in
// memory.
inline constexpr long kMaxIdealSlots = 30'000'000;

struct ExperimentConfig {
  std::string dataset_dir;
  ModelConfig model = ModelConfig::defaults(ModelKind::kGcn);
  bool hidden_set = false;
  bool regularized = true;
  SimilarityKind similarity = SimilarityKind::kNormalizedAdjacency;
  int t_steps = 1;
  bool global_norm_projection = false;
  double tau0 = 1.0, lambda0 = 3.0, epsilon0 = 1.0;
  double lr_tau = 0.01, lr_lambda = 0.001, lr_epsilon = 0.01;
  bool learn_reg_params = true;
  TrainConfig train;
  SplitSpec split;
  int num_splits = 5;
  int num_inits = 3;
  std::uint64_t master_seed = 1;
  int threads = 1;
  std::vector<double> sweep_tau0, sweep_lambda0, sweep_epsilon0;
  int sweep_splits = 5;
  int sweep_inits = 5;
  int time_epochs = 100;
  int time_warmup = 5;

  static ExperimentConfig parse_string(const std::string& text, const std::string& base_dir);
  static ExperimentConfig parse_file(const std::string& path);
  std::string echo() const;
  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail("config: " + key + " must be a boolean, got '" + v + "'");
}

inline std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  for (const std::string& tok : split_on(v, ',')) {
    const std::string t = trim(tok);
    if (t.empty()) continue;
    out.push_back(parse_double(t, "config: " + key));
  }
  require(!out.empty(), "config: " + key + " is an empty list");
  return out;
}

inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += format_g17(xs[i]);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::parse_string(const std::string& text,
                                                       const std::string& base_dir) {
  namespace fs = std::filesystem;
  ExperimentConfig c;
  bool dataset_seen = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(line_no) +
                                         ": expected 'key = value', got '" + stripped + "'");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    require(!key.empty(), "config line " + std::to_string(line_no) + ": empty key");
    require(!value.empty(), "config: key '" + key + "' has an empty value");

    const std::string ctx = "config: " + key;
    if (key == "dataset") {
      fs::path p(value);
      if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
      c.dataset_dir = p.lexically_normal().string();
      dataset_seen = true;
    } else if (key == "model") {
      c.model.kind = parse_model_kind(value);
      if (!c.hidden_set) c.model.hidden = ModelConfig::defaults(c.model.kind).hidden;
    } else if (key == "hidden") {
      c.model.hidden = detail::parse_int(value, ctx);
      c.hidden_set = true;
    } else if (key == "dropout") {
      c.model.dropout = detail::parse_double(value, ctx);
    } else if (key == "weight_decay") {
      c.model.weight_decay = detail::parse_double(value, ctx);
    } else if (key == "lr") {
      c.model.lr = detail::parse_double(value, ctx);
    } else if (key == "sage_l2_normalize") {
      c.model.sage_l2_normalize = detail::parse_bool(value, key);
    } else if (key == "regularized") {
      c.regularized = detail::parse_bool(value, key);
    } else if (key == "similarity") {
      if (value == "normalized-adjacency")
        c.similarity = SimilarityKind::kNormalizedAdjacency;
      else if (value == "ideal")
        c.similarity = SimilarityKind::kIdeal;
      else
        fail("config: similarity must be 'normalized-adjacency' or 'ideal', got '" + value +
             "'");
    } else if (key == "T" || key == "t_steps") {
      c.t_steps = detail::parse_int(value, ctx);
    } else if (key == "global_norm_projection") {
      c.global_norm_projection = detail::parse_bool(value, key);
    } else if (key == "tau0") {
      c.tau0 = detail::parse_double(value, ctx);
    } else if (key == "lambda0") {
      c.lambda0 = detail::parse_double(value, ctx);
    } else if (key == "epsilon0") {
      c.epsilon0 = detail::parse_double(value, ctx);
    } else if (key == "lr_tau") {
      c.lr_tau = detail::parse_double(value, ctx);
    } else if (key == "lr_lambda") {
      c.lr_lambda = detail::parse_double(value, ctx);
    } else if (key == "lr_epsilon") {
      c.lr_epsilon = detail::parse_double(value, ctx);
    } else if (key == "learn_reg_params") {
      c.learn_reg_params = detail::parse_bool(value, key);
    } else if (key == "max_epochs") {
      c.train.max_epochs = detail::parse_int(value, ctx);
    } else if (key == "patience") {
      c.train.patience = detail::parse_int(value, ctx);
    } else if (key == "strict_patience") {
      c.train.strict_patience = detail::parse_bool(value, key);
    } else if (key == "invariant_every") {
      c.train.invariant_every = detail::parse_int(value, ctx);
    } else if (key == "split_mode") {
      if (value == "per-class")
        c.split.mode = SplitSpec::Mode::kPerClass;
      else if (value == "fraction")
        c.split.mode = SplitSpec::Mode::kFraction;
      else
        fail("config: split_mode must be 'per-class' or 'fraction', got '" + value + "'");
    } else if (key == "train_per_class") {
      c.split.train_per_class = detail::parse_int(value, ctx);
    } else if (key == "val_per_class") {
      c.split.val_per_class = detail::parse_int(value, ctx);
    } else if (key == "train_fraction") {
      c.split.train_fraction = detail::parse_double(value, ctx);
    } else if (key == "val_fraction") {
      c.split.val_fraction = detail::parse_double(value, ctx);
    } else if (key == "num_splits") {
      c.num_splits = detail::parse_int(value, ctx);
    } else if (key == "num_inits") {
      c.num_inits = detail::parse_int(value, ctx);
    } else if (key == "seed") {
      try {
        c.master_seed = std::stoull(value);
      } catch (const std::exception&) {
        fail("config: seed must be a non-negative integer, got '" + value + "'");
      }
    } else if (key == "threads") {
      c.threads = detail::parse_int(value, ctx);
    } else if (key == "sweep_tau0") {
      c.sweep_tau0 = detail::parse_double_list(value, key);
    } else if (key == "sweep_lambda0") {
      c.sweep_lambda0 = detail::parse_double_list(value, key);
    } else if (key == "sweep_epsilon0") {
      c.sweep_epsilon0 = detail::parse_double_list(value, key);
    } else if (key == "sweep_splits") {
      c.sweep_splits = detail::parse_int(value, ctx);
    } else if (key == "sweep_inits") {
      c.sweep_inits = detail::parse_int(value, ctx);
    } else if (key == "time_epochs") {
      c.time_epochs = detail::parse_int(value, ctx);
    } else if (key == "time_warmup") {
      c.time_warmup = detail::parse_int(value, ctx);
    } else {
      fail("config: unknown key '" + key + "'");
    }
  }
  require(dataset_seen, "config: missing required key 'dataset'");
  c.validate();
  return c;
}

inline ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), std::filesystem::path(path).parent_path().string());
}

inline void ExperimentConfig::validate() const {
  require(num_splits >= 1 && num_inits >= 1, "config: num_splits and num_inits must be >= 1");
  require(sweep_splits >= 1 && sweep_inits >= 1,
          "config: sweep_splits and sweep_inits must be >= 1");
  require(t_steps >= 0, "config: T must be non-negative");
  require(threads >= 1, "config: threads must be >= 1");
  require(time_epochs >= 1 && time_warmup >= 0, "config: bad timing settings");
  require(tau0 > 0.0, "config: tau0 must be positive");
  require(lambda0 >= 0.0, "config: lambda0 must be non-negative");
  require(epsilon0 > 0.0, "config: epsilon0 must be positive");
}

// Reparseable dump of every setting, with the dataset path resolved. This is
// what run directories store, so export can rebuild the exact model.
inline std::string ExperimentConfig::echo() const {
  using detail::format_g17;
  std::ostringstream out;
  out << "dataset = " << dataset_dir << "\n";
  out << "model = " << model_kind_name(model.kind) << "\n";
  out << "hidden = " << model.hidden << "\n";
  out << "dropout = " << format_g17(model.dropout) << "\n";
  out << "weight_decay = " << format_g17(model.weight_decay) << "\n";
  out << "lr = " << format_g17(model.lr) << "\n";
  out << "sage_l2_normalize = " << (model.sage_l2_normalize ? "true" : "false") << "\n";
  out << "regularized = " << (regularized ? "true" : "false") << "\n";
  out << "similarity = "
      << (similarity == SimilarityKind::kIdeal ? "ideal" : "normalized-adjacency") << "\n";
  out << "T = " << t_steps << "\n";
  out << "global_norm_projection = " << (global_norm_projection ? "true" : "false") << "\n";
  out << "tau0 = " << format_g17(tau0) << "\n";
  out << "lambda0 = " << format_g17(lambda0) << "\n";
  out << "epsilon0 = " << format_g17(epsilon0) << "\n";
  out << "lr_tau = " << format_g17(lr_tau) << "\n";
  out << "lr_lambda = " << format_g17(lr_lambda) << "\n";
  out << "lr_epsilon = " << format_g17(lr_epsilon) << "\n";
  out << "learn_reg_params = " << (learn_reg_params ? "true" : "false") << "\n";
  out << "max_epochs = " << train.max_epochs << "\n";
  out << "patience = " << train.patience << "\n";
  out << "strict_patience = " << (train.strict_patience ? "true" : "false") << "\n";
  out << "invariant_every = " << train.invariant_every << "\n";
  out << "split_mode = "
      << (split.mode == SplitSpec::Mode::kPerClass ? "per-class" : "fraction") << "\n";
  out << "train_per_class = " << split.train_per_class << "\n";
  out << "val_per_class = " << split.val_per_class << "\n";
  out << "train_fraction = " << format_g17(split.train_fraction) << "\n";
  out << "val_fraction = " << format_g17(split.val_fraction) << "\n";
  out << "num_splits = " << num_splits << "\n";
  out << "num_inits = " << num_inits << "\n";
  out << "seed = " << master_seed << "\n";
  out << "threads = " << threads << "\n";
  if (!sweep_tau0.empty()) out << "sweep_tau0 = " << detail::join_doubles(sweep_tau0) << "\n";
  if (!sweep_lambda0.empty())
    out << "sweep_lambda0 = " << detail::join_doubles(sweep_lambda0) << "\n";
  if (!sweep_epsilon0.empty())
    out << "sweep_epsilon0 = " << detail::join_doubles(sweep_epsilon0) << "\n";
  out << "sweep_splits = " << sweep_splits << "\n";
  out << "sweep_inits = " << sweep_inits << "\n";
  out << "time_epochs = " << time_epochs << "\n";
  out << "time_warmup = " << time_warmup << "\n";
  return out.str();
}

// Dataset plus the similarity structure, built once and shared read-only by
// every run of an experiment.
struct PreparedData {
  CanonicalDataset ds;
  EdgeStructure es;  // built only for regularized configs
  bool has_es = false;
};

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData data;
  data.ds = load_dataset(cfg.dataset_dir);
  if (cfg.regularized) {
    SparseMatrix sim;
    if (cfg.similarity == SimilarityKind::kIdeal) {
      long slots = 0;
      std::vector<long> counts(static_cast<size_t>(data.ds.graph.num_classes), 0);
      for (int l : data.ds.graph.labels) ++counts[l];
      for (long m : counts) slots += m * (m - 1);
      require(slots <= kMaxIdealSlots,
              "ideal similarity for " + data.ds.meta.name + " needs " + std::to_string(slots) +
                  " edge slots; refusing beyond " + std::to_string(kMaxIdealSlots));
      sim = ideal_similarity(data.ds.graph.labels, data.ds.graph.num_classes);
    } else {
      sim = similarity_matrix(data.ds.graph);
    }
    data.es = EdgeStructure::build(sim);
    data.has_es = true;
  }
  return data;
}

struct SingleRun {
  RunResult result;
  Split split;
  GnnModel model;
  RegSoftmaxParams reg;
  bool has_reg = false;
};

// One (split, init) cell: the model is initialized from the run seed and the
// same stream then drives dropout for the whole run.
inline SingleRun run_single(const ExperimentConfig& cfg, const PreparedData& data, Split split,
                            std::uint64_t run_seed) {
  SingleRun sr;
  sr.split = std::move(split);
  Rng rng(run_seed);
  sr.model = GnnModel::create(cfg.model, data.ds.graph, data.ds.features, rng);
  if (cfg.regularized) {
    sr.reg = RegSoftmaxParams::create(cfg.tau0, cfg.lambda0, cfg.epsilon0, cfg.lr_tau,
                                      cfg.lr_lambda, cfg.lr_epsilon);
    sr.reg.t_steps = cfg.t_steps;
    sr.reg.global_norm_projection = cfg.global_norm_projection;
    sr.reg.tau.learnable = cfg.learn_reg_params;
    sr.reg.lambda.learnable = cfg.learn_reg_params;
    sr.reg.epsilon.learnable = cfg.learn_reg_params;
    sr.has_reg = true;
    sr.result = train_run(sr.model, &sr.reg, &data.es, data.ds.graph, sr.split, cfg.train, rng);
  } else {
    sr.result = train_run(sr.model, nullptr, nullptr, data.ds.graph, sr.split, cfg.train, rng);
  }
  return sr;
}

struct CellResult {
  int split = 0;
  int init = 0;
  std::uint64_t seed = 0;
  RunResult run;
};

struct ExperimentSummary {
  std::vector<CellResult> cells;  // sorted by (split, init)
  int successes = 0;
  int failures = 0;
  double mean_test_acc = std::numeric_limits<double>::quiet_NaN();
  double std_test_acc = std::numeric_limits<double>::quiet_NaN();
  double mean_val_acc = std::numeric_limits<double>::quiet_NaN();
  double mean_epochs = std::numeric_limits<double>::quiet_NaN();
  double mean_seconds_per_epoch = std::numeric_limits<double>::quiet_NaN();

  bool excessive_failures() const {
    const int total = successes + failures;
    return total > 0 && failures * 10 > total;
  }
};

namespace detail {

// Population standard deviation, matching the reporting convention.
inline std::pair<double, double> mean_and_pop_std(const std::vector<double>& xs) {
  if (xs.empty())
    return {std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

inline void aggregate(ExperimentSummary& s) {
  std::sort(s.cells.begin(), s.cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tie(a.split, a.init) < std::tie(b.split, b.init);
  });
  std::vector<double> accs, vals, epochs, secs;
  s.successes = 0;
  s.failures = 0;
  for (const CellResult& c : s.cells) {
    if (c.run.failed) {
      ++s.failures;
      continue;
    }
    ++s.successes;
    accs.push_back(c.run.test_acc);
    vals.push_back(c.run.best_val_acc);
    epochs.push_back(c.run.epochs_run);
    if (c.run.epochs_run > 0) secs.push_back(c.run.train_seconds / c.run.epochs_run);
  }
  std::tie(s.mean_test_acc, s.std_test_acc) = mean_and_pop_std(accs);
  s.mean_val_acc = mean_and_pop_std(vals).first;
  s.mean_epochs = mean_and_pop_std(epochs).first;
  s.mean_seconds_per_epoch = mean_and_pop_std(secs).first;
}

// Runs S x I cells over a small worker pool. Every cell derives its seeds
// from (master, split) and (master, split, init) alone, so the pool size
// cannot change any result.
inline ExperimentSummary run_matrix(const ExperimentConfig& cfg, const PreparedData& data,
                                    int num_splits, int num_inits) {
  std::vector<Split> splits;
  splits.reserve(static_cast<size_t>(num_splits));
  for (int s = 0; s < num_splits; ++s) {
    Rng split_rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(s)));
    splits.push_back(make_split(data.ds.graph.labels, data.ds.graph.num_classes, cfg.split,
                                split_rng));
  }

  ExperimentSummary summary;
  summary.cells.resize(static_cast<size_t>(num_splits) * num_inits);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      const size_t k = next.fetch_add(1);
      if (k >= summary.cells.size()) return;
      const int s = static_cast<int>(k) / num_inits;
      const int i = static_cast<int>(k) % num_inits;
      CellResult& cell = summary.cells[k];
      cell.split = s;
      cell.init = i;
      cell.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(s),
                              static_cast<std::uint64_t>(i));
      try {
        cell.run = run_single(cfg, data, splits[s], cell.seed).result;
      } catch (const std::exception& e) {
        cell.run.failed = true;
        cell.run.failure_reason = e.what();
      }
    }
  };
  const int pool = std::min<int>(cfg.threads, static_cast<int>(summary.cells.size()));
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(pool));
    for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  aggregate(summary);
  return summary;
}

inline void write_runs_tsv(const std::string& path, const std::vector<CellResult>& cells) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "split\tinit\tseed\tfailed\tepochs\tbest_epoch\tval_acc\tval_loss\ttest_acc\t"
         "test_loss\ttau\tlambda\tepsilon\treason\n";
  for (const CellResult& c : cells) {
    out << c.split << '\t' << c.init << '\t' << c.seed << '\t' << (c.run.failed ? 1 : 0) << '\t'
        << c.run.epochs_run << '\t' << c.run.best_epoch << '\t' << format_g17(c.run.best_val_acc)
        << '\t' << format_g17(c.run.best_val_loss) << '\t' << format_g17(c.run.test_acc) << '\t'
        << format_g17(c.run.test_loss) << '\t' << format_g17(c.run.tau) << '\t'
        << format_g17(c.run.lambda) << '\t' << format_g17(c.run.epsilon) << '\t'
        << (c.run.failure_reason.empty() ? "-" : c.run.failure_reason) << '\n';
  }
}

inline void write_timing_tsv(const std::string& path, const std::vector<CellResult>& cells) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "split\tinit\ttrain_seconds\tseconds_per_epoch\n";
  for (const CellResult& c : cells) {
    const double per_epoch =
        c.run.epochs_run > 0 ? c.run.train_seconds / c.run.epochs_run
                             : std::numeric_limits<double>::quiet_NaN();
    out << c.split << '\t' << c.init << '\t' << format_g17(c.run.train_seconds) << '\t'
        << format_g17(per_epoch) << '\n';
  }
}

inline void write_summary_tsv(const std::string& path, const ExperimentConfig& cfg,
                              const std::string& dataset_name, const ExperimentSummary& s,
                              int num_splits, int num_inits) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "dataset\tmodel\tregularized\tsimilarity\tT\tnum_splits\tnum_inits\tsuccesses\t"
         "failures\tmean_test_acc\tstd_test_acc\tmean_val_acc\tmean_epochs\n";
  out << dataset_name << '\t'
      << model_kind_name(cfg.model.kind) << '\t' << (cfg.regularized ? 1 : 0) << '\t'
      << (cfg.similarity == SimilarityKind::kIdeal ? "ideal" : "normalized-adjacency") << '\t'
      << cfg.t_steps << '\t' << num_splits << '\t' << num_inits << '\t' << s.successes << '\t'
      << s.failures << '\t' << format_g17(s.mean_test_acc) << '\t'
      << format_g17(s.std_test_acc) << '\t' << format_g17(s.mean_val_acc) << '\t'
      << format_g17(s.mean_epochs) << '\n';
}

}  // namespace detail

// Full experiment matrix. Writes runs.tsv + summary.tsv (deterministic for a
// given config and seed) and timing.tsv (wall-clock, segregated so the other
// files stay byte-reproducible).
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const PreparedData data = prepare_data(cfg);
  ExperimentSummary summary = detail::run_matrix(cfg, data, cfg.num_splits, cfg.num_inits);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "config.txt");
    require(out.good(), "cannot write config.txt in " + out_dir);
    out << cfg.echo();
  }
  detail::write_runs_tsv((fs::path(out_dir) / "runs.tsv").string(), summary.cells);
  detail::write_summary_tsv((fs::path(out_dir) / "summary.tsv").string(), cfg,
                            data.ds.meta.name, summary, cfg.num_splits, cfg.num_inits);
  detail::write_timing_tsv((fs::path(out_dir) / "timing.tsv").string(), summary.cells);
  return summary;
}

struct SweepRow {
  double tau0, lambda0, epsilon0;
  ExperimentSummary summary;
};

// Grid sweep over the iteration initials. Every grid point reuses the same
// split and init seeds, so points are directly comparable.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  require(cfg.regularized, "sweep: config must set regularized = true");
  const std::vector<double> taus = cfg.sweep_tau0.empty() ? std::vector<double>{cfg.tau0}
                                                          : cfg.sweep_tau0;
  const std::vector<double> lambdas = cfg.sweep_lambda0.empty()
                                          ? std::vector<double>{cfg.lambda0}
                                          : cfg.sweep_lambda0;
  const std::vector<double> epsilons = cfg.sweep_epsilon0.empty()
                                           ? std::vector<double>{cfg.epsilon0}
                                           : cfg.sweep_epsilon0;
  const PreparedData data = prepare_data(cfg);

  std::vector<SweepRow> rows;
  for (double tv : taus)
    for (double lv : lambdas)
      for (double ev : epsilons) {
        ExperimentConfig point = cfg;
        point.tau0 = tv;
        point.lambda0 = lv;
        point.epsilon0 = ev;
        point.validate();
        SweepRow row{tv, lv, ev,
                     detail::run_matrix(point, data, cfg.sweep_splits, cfg.sweep_inits)};
        rows.push_back(std::move(row));
      }

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "config.txt");
    require(out.good(), "cannot write config.txt in " + out_dir);
    out << cfg.echo();
  }
  std::ofstream out(fs::path(out_dir) / "sweep.tsv");
  require(out.good(), "cannot write sweep.tsv in " + out_dir);
  out << "tau0\tlambda0\tepsilon0\tsuccesses\tfailures\tmean_test_acc\tstd_test_acc\n";
  for (const SweepRow& r : rows)
    out << detail::format_g17(r.tau0) << '\t' << detail::format_g17(r.lambda0) << '\t'
        << detail::format_g17(r.epsilon0) << '\t' << r.summary.successes << '\t'
        << r.summary.failures << '\t' << detail::format_g17(r.summary.mean_test_acc) << '\t'
        << detail::format_g17(r.summary.std_test_acc) << '\n';
  return rows;
}

struct TimingReport {
  int epochs_timed = 0;
  double median_seconds = 0.0;
  double mean_seconds = 0.0;
  double min_seconds = 0.0;
  double max_seconds = 0.0;
};

// Median wall-clock seconds per optimization step (forward + backward +
// update, evaluation excluded) over warm epochs on the first (split, init)
// cell of the config.
inline TimingReport time_epochs(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  Rng split_rng(derive_seed(cfg.master_seed, 0));
  const Split split =
      make_split(data.ds.graph.labels, data.ds.graph.num_classes, cfg.split, split_rng);
  Rng rng(derive_seed(cfg.master_seed, 0, 0));
  GnnModel model = GnnModel::create(cfg.model, data.ds.graph, data.ds.features, rng);
  RegSoftmaxParams reg;
  if (cfg.regularized) {
    reg = RegSoftmaxParams::create(cfg.tau0, cfg.lambda0, cfg.epsilon0, cfg.lr_tau,
                                   cfg.lr_lambda, cfg.lr_epsilon);
    reg.t_steps = cfg.t_steps;
    reg.global_norm_projection = cfg.global_norm_projection;
    reg.tau.learnable = cfg.learn_reg_params;
    reg.lambda.learnable = cfg.learn_reg_params;
    reg.epsilon.learnable = cfg.learn_reg_params;
  }
  std::vector<Parameter*> params = model.parameters();
  if (cfg.regularized) {
    params.push_back(&reg.tau);
    params.push_back(&reg.lambda);
    params.push_back(&reg.epsilon);
  }
  AdamOptimizer opt(params);

  auto run_epoch = [&] {
    Tape t;
    const Value logits = model.logits(t, /*training=*/true, rng);
    const Value probs = cfg.regularized
                            ? reg_softmax_forward(t, data.es, logits, reg).probs
                            : t.row_softmax(logits);
    Value loss = cross_entropy_loss(t, probs, data.ds.graph.labels, split.train);
    const Value penalty = model.decay_penalty(t);
    if (penalty.valid()) loss = t.add(loss, penalty);
    t.backward(loss);
    opt.step();
  };

  for (int w = 0; w < cfg.time_warmup; ++w) run_epoch();
  std::vector<double> times;
  times.reserve(static_cast<size_t>(cfg.time_epochs));
  for (int e = 0; e < cfg.time_epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    run_epoch();
    times.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  TimingReport rep;
  rep.epochs_timed = cfg.time_epochs;
  rep.median_seconds = sorted[sorted.size() / 2];
  rep.min_seconds = sorted.front();
  rep.max_seconds = sorted.back();
  for (double t : times) rep.mean_seconds += t;
  rep.mean_seconds /= static_cast<double>(times.size());
  return rep;
}

// --- run artifacts: a trained single run on disk, consumed by `export` ---

inline void save_run_artifacts(const std::string& dir, const ExperimentConfig& cfg,
                               SingleRun& sr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "config.txt");
    require(out.good(), "cannot write config.txt in " + dir);
    // `export` re-reads this config relative to the run directory, so a
    // dataset path that was relative to the working directory must be pinned
    ExperimentConfig pinned = cfg;
    pinned.dataset_dir = fs::absolute(pinned.dataset_dir).lexically_normal().string();
    out << pinned.echo();
  }
  {
    std::ofstream out(fs::path(dir) / "split.tsv");
    require(out.good(), "cannot write split.tsv in " + dir);
    out << "node\tsubset\n";
    for (int i : sr.split.train) out << i << "\ttrain\n";
    for (int i : sr.split.val) out << i << "\tval\n";
    for (int i : sr.split.test) out << i << "\ttest\n";
  }
  {
    std::ofstream out(fs::path(dir) / "params.tsv");
    require(out.good(), "cannot write params.tsv in " + dir);
    out << "name\trow\tcol\tvalue\n";
    auto dump = [&out](const Parameter& p) {
      for (int i = 0; i < p.value.rows; ++i)
        for (int j = 0; j < p.value.cols; ++j)
          out << p.name << '\t' << i << '\t' << j << '\t'
              << detail::format_g17(p.value(i, j)) << '\n';
    };
    for (const Parameter* p : sr.model.parameters()) dump(*p);
    if (sr.has_reg) {
      dump(sr.reg.tau);
      dump(sr.reg.lambda);
      dump(sr.reg.epsilon);
    }
  }
  {
    std::ofstream out(fs::path(dir) / "result.tsv");
    require(out.good(), "cannot write result.tsv in " + dir);
    out << "failed\tepochs\tbest_epoch\tval_acc\tval_loss\ttest_acc\ttest_loss\ttau\tlambda\t"
           "epsilon\treason\n";
    const RunResult& r = sr.result;
    out << (r.failed ? 1 : 0) << '\t' << r.epochs_run << '\t' << r.best_epoch << '\t'
        << detail::format_g17(r.best_val_acc) << '\t' << detail::format_g17(r.best_val_loss)
        << '\t' << detail::format_g17(r.test_acc) << '\t' << detail::format_g17(r.test_loss)
        << '\t' << detail::format_g17(r.tau) << '\t' << detail::format_g17(r.lambda) << '\t'
        << detail::format_g17(r.epsilon) << '\t'
        << (r.failure_reason.empty() ? "-" : r.failure_reason) << '\n';
  }
}

// Rebuilds the model from a run directory and writes predictions.tsv (test
// nodes: true/predicted labels and the full probability row) plus
// embeddings.tsv (all nodes: pre-softmax logits, t-SNE input).
inline void export_run(const std::string& run_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg =
      ExperimentConfig::parse_file((fs::path(run_dir) / "config.txt").string());
  const PreparedData data = prepare_data(cfg);

  Split split;
  {
    const auto lines = detail::read_lines((fs::path(run_dir) / "split.tsv").string());
    require(!lines.empty() && lines[0] == "node\tsubset", run_dir + "/split.tsv: bad header");
    for (size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = detail::split_on(lines[i], '\t');
      require(f.size() == 2, run_dir + "/split.tsv: malformed line '" + lines[i] + "'");
      const int node = detail::parse_int(f[0], "split.tsv");
      if (f[1] == "train")
        split.train.push_back(node);
      else if (f[1] == "val")
        split.val.push_back(node);
      else if (f[1] == "test")
        split.test.push_back(node);
      else
        fail(run_dir + "/split.tsv: unknown subset '" + f[1] + "'");
    }
  }

  Rng dummy(0);
  GnnModel model = GnnModel::create(cfg.model, data.ds.graph, data.ds.features, dummy);
  RegSoftmaxParams reg;
  if (cfg.regularized) {
    reg = RegSoftmaxParams::create(cfg.tau0, cfg.lambda0, cfg.epsilon0, cfg.lr_tau,
                                   cfg.lr_lambda, cfg.lr_epsilon);
    reg.t_steps = cfg.t_steps;
    reg.global_norm_projection = cfg.global_norm_projection;
  }
  {
    std::map<std::string, Parameter*> by_name;
    for (Parameter* p : model.parameters()) by_name[p->name] = p;
    if (cfg.regularized) {
      by_name["tau"] = &reg.tau;
      by_name["lambda"] = &reg.lambda;
      by_name["epsilon"] = &reg.epsilon;
    }
    const auto lines = detail::read_lines((fs::path(run_dir) / "params.tsv").string());
    require(!lines.empty() && lines[0] == "name\trow\tcol\tvalue",
            run_dir + "/params.tsv: bad header");
    for (size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = detail::split_on(lines[i], '\t');
      require(f.size() == 4, run_dir + "/params.tsv: malformed line '" + lines[i] + "'");
      const auto it = by_name.find(f[0]);
      require(it != by_name.end(), run_dir + "/params.tsv: unknown parameter '" + f[0] + "'");
      DenseMatrix& v = it->second->value;
      const int r = detail::parse_int(f[1], "params.tsv");
      const int c = detail::parse_int(f[2], "params.tsv");
      require(r >= 0 && r < v.rows && c >= 0 && c < v.cols,
              run_dir + "/params.tsv: index (" + f[1] + "," + f[2] + ") out of range for " +
                  f[0]);
      v(r, c) = detail::parse_double(f[3], "params.tsv");
    }
  }

  Tape t;
  Rng unused(0);
  const Value logits = model.logits(t, /*training=*/false, unused);
  const Value probs = cfg.regularized ? reg_softmax_forward(t, data.es, logits, reg).probs
                                      : t.row_softmax(logits);
  const DenseMatrix& p = t.val(probs);
  const DenseMatrix& o = t.val(logits);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "predictions.tsv");
    require(out.good(), "cannot write predictions.tsv in " + out_dir);
    out << "node\ttrue_label\tpred_label";
    for (int c = 0; c < p.cols; ++c) out << "\tp" << c;
    out << '\n';
    for (int i : split.test) {
      int arg = 0;
      for (int c = 1; c < p.cols; ++c)
        if (p(i, c) > p(i, arg)) arg = c;
      out << i << '\t' << data.ds.graph.labels[i] << '\t' << arg;
      for (int c = 0; c < p.cols; ++c) out << '\t' << detail::format_g17(p(i, c));
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "embeddings.tsv");
    require(out.good(), "cannot write embeddings.tsv in " + out_dir);
    out << "node\tlabel";
    for (int c = 0; c < o.cols; ++c) out << "\te" << c;
    out << '\n';
    for (int i = 0; i < o.rows; ++i) {
      out << i << '\t' << data.ds.graph.labels[i];
      for (int c = 0; c < o.cols; ++c) out << '\t' << detail::format_g17(o(i, c));
      out << '\n';
    }
  }
}

}  // namespace tvgnn
