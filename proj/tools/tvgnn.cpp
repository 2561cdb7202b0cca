// Command-line front end: dataset ingestion and inspection, single training
// runs, experiment matrices, hyperparameter sweeps, epoch timing, and export
// of predictions/embeddings from saved runs.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tvgnn/dataio.hpp"
#include "tvgnn/experiment.hpp"

namespace {

int cmd_ingest(const std::string& format, const std::vector<std::string>& paths,
               const std::string& out_dir, std::string name) {
  if (name.empty()) name = std::filesystem::path(paths[0]).stem().string();
  tvgnn::IngestReport rep;
  if (format == "content-cites")
    rep = tvgnn::ingest_content_cites(name, paths[0], paths[1]);
  else if (format == "webkb")
    rep = tvgnn::ingest_webkb(name, paths[0], paths[1]);
  else if (format == "pubmed")
    rep = tvgnn::ingest_pubmed(name, paths[0], paths[1]);
  else
    tvgnn::fail("unknown ingest format '" + format +
                "' (expected content-cites, webkb, or pubmed)");
  for (const std::string& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  tvgnn::save_dataset(out_dir, rep.dataset);
  std::cout << tvgnn::dataset_stats(rep.dataset);
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_stats(const std::string& dir) {
  std::cout << tvgnn::dataset_stats(tvgnn::load_dataset(dir));
  return 0;
}

void print_run(const tvgnn::RunResult& r, bool regularized) {
  if (r.failed) {
    std::cout << "run FAILED: " << r.failure_reason << "\n";
    return;
  }
  std::cout << "test_acc " << tvgnn::detail::format_g17(r.test_acc) << "  val_acc "
            << tvgnn::detail::format_g17(r.best_val_acc) << "  best_epoch " << r.best_epoch
            << "  epochs " << r.epochs_run << "  seconds "
            << tvgnn::detail::format_g17(r.train_seconds) << "\n";
  if (regularized)
    std::cout << "learned tau " << tvgnn::detail::format_g17(r.tau) << "  lambda "
              << tvgnn::detail::format_g17(r.lambda) << "  epsilon "
              << tvgnn::detail::format_g17(r.epsilon) << "\n";
}

int cmd_train(const std::string& config_path, bool seed_set, std::uint64_t seed,
              const std::string& out_dir) {
  tvgnn::ExperimentConfig cfg = tvgnn::ExperimentConfig::parse_file(config_path);
  if (seed_set) cfg.master_seed = seed;
  const tvgnn::PreparedData data = tvgnn::prepare_data(cfg);
  tvgnn::Rng split_rng(tvgnn::derive_seed(cfg.master_seed, 0));
  tvgnn::Split split = tvgnn::make_split(data.ds.graph.labels, data.ds.graph.num_classes,
                                         cfg.split, split_rng);
  tvgnn::SingleRun sr = tvgnn::run_single(cfg, data, std::move(split),
                                          tvgnn::derive_seed(cfg.master_seed, 0, 0));
  print_run(sr.result, cfg.regularized);
  if (!out_dir.empty()) {
    tvgnn::save_run_artifacts(out_dir, cfg, sr);
    std::cout << "wrote " << out_dir << "\n";
  }
  return sr.result.failed ? 1 : 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir) {
  const tvgnn::ExperimentConfig cfg = tvgnn::ExperimentConfig::parse_file(config_path);
  const tvgnn::ExperimentSummary s = tvgnn::run_experiment(cfg, out_dir);
  std::cout << "runs " << (s.successes + s.failures) << "  failures " << s.failures
            << "  mean_test_acc " << tvgnn::detail::format_g17(s.mean_test_acc) << "  std "
            << tvgnn::detail::format_g17(s.std_test_acc) << "\n";
  std::cout << "wrote " << out_dir << "\n";
  if (s.excessive_failures()) {
    std::cerr << "error: more than 10% of runs failed\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  const tvgnn::ExperimentConfig cfg = tvgnn::ExperimentConfig::parse_file(config_path);
  const auto rows = tvgnn::run_sweep(cfg, out_dir);
  for (const auto& r : rows)
    std::cout << "tau0 " << r.tau0 << "  lambda0 " << r.lambda0 << "  epsilon0 " << r.epsilon0
              << "  mean_test_acc " << tvgnn::detail::format_g17(r.summary.mean_test_acc)
              << "\n";
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_time(const std::string& config_path) {
  const tvgnn::ExperimentConfig cfg = tvgnn::ExperimentConfig::parse_file(config_path);
  const tvgnn::TimingReport rep = tvgnn::time_epochs(cfg);
  std::cout << "epochs " << rep.epochs_timed << "  median_s "
            << tvgnn::detail::format_g17(rep.median_seconds) << "  mean_s "
            << tvgnn::detail::format_g17(rep.mean_seconds) << "  min_s "
            << tvgnn::detail::format_g17(rep.min_seconds) << "  max_s "
            << tvgnn::detail::format_g17(rep.max_seconds) << "\n";
  return 0;
}

int cmd_export(const std::string& run_dir, const std::string& out_dir) {
  tvgnn::export_run(run_dir, out_dir);
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-local TV regularized softmax for graph neural networks"};
  app.require_subcommand(1);

  std::string format, out_dir, name, config_path, dataset_dir, run_dir;
  std::vector<std::string> paths;
  std::uint64_t seed = 0;

  auto* ingest = app.add_subcommand("ingest", "convert a raw corpus to the canonical layout");
  ingest->add_option("format", format, "content-cites | webkb | pubmed")->required();
  ingest->add_option("paths", paths, "node/content file, then edge/cites file")
      ->required()
      ->expected(2);
  ingest->add_option("--out", out_dir, "canonical dataset directory to write")->required();
  ingest->add_option("--name", name, "dataset name (default: first file's stem)");

  auto* stats = app.add_subcommand("stats", "print canonical dataset statistics");
  stats->add_option("dir", dataset_dir, "canonical dataset directory")->required();

  auto* train = app.add_subcommand("train", "run a single training run");
  train->add_option("--config", config_path, "experiment config file")->required();
  auto* seed_opt = train->add_option("--seed", seed, "override the master seed");
  train->add_option("--out", out_dir, "write run artifacts to this directory");

  auto* experiment = app.add_subcommand("experiment", "run a splits x inits matrix");
  experiment->add_option("--config", config_path, "experiment config file")->required();
  experiment->add_option("--out", out_dir, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "grid sweep over tau0/lambda0/epsilon0");
  sweep->add_option("--config", config_path, "experiment config file")->required();
  sweep->add_option("--out", out_dir, "output directory")->required();

  auto* time_cmd = app.add_subcommand("time", "median seconds per optimization step");
  time_cmd->add_option("--config", config_path, "experiment config file")->required();

  auto* export_cmd = app.add_subcommand("export", "write predictions/embeddings from a run");
  export_cmd->add_option("--run", run_dir, "run directory written by train --out")->required();
  export_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(format, paths, out_dir, name);
    if (*stats) return cmd_stats(dataset_dir);
    if (*train) return cmd_train(config_path, seed_opt->count() > 0, seed, out_dir);
    if (*experiment) return cmd_experiment(config_path, out_dir);
    if (*sweep) return cmd_sweep(config_path, out_dir);
    if (*time_cmd) return cmd_time(config_path);
    if (*export_cmd) return cmd_export(run_dir, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
