// codadapt command line: train / eval / transfer-matrix / group / report / synth.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "CLI11.hpp"
#include "codadapt/config.hpp"
#include "codadapt/data.hpp"
#include "codadapt/errors.hpp"
#include "codadapt/metrics.hpp"
#include "codadapt/multitask.hpp"
#include "codadapt/train.hpp"

namespace fs = std::filesystem;
using namespace codadapt;

namespace {

int run_train(const std::string& config, const std::string& regime_text, const std::string& tasks,
              const std::string& eval_tasks, const std::string& source_ckpt,
              const std::string& out_dir, std::int64_t seed, bool verbose) {
  auto cfg = ExperimentConfig::load(config);
  if (seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) cfg.train.out_dir = out_dir;
  Regime regime;
  regime.kind = parse_regime_kind(regime_text);
  regime.target_tasks = split_list(tasks);
  regime.eval_tasks = split_list(eval_tasks);
  const auto registry = load_registry(cfg);
  RegimeOptions opts;
  opts.out_dir = cfg.train.out_dir;
  opts.verbose = verbose;
  const auto result = train_regime(regime, registry, cfg, source_ckpt, opts);
  std::cout << result.to_json().dump(2) << "\n";
  return 0;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& out) {
  const auto eval = evaluate_dataset(pred, gt);
  for (const auto& u : eval.unmatched) std::cerr << "warning: unmatched " << u << "\n";
  for (const auto& [stem, msg] : eval.sample_errors) std::cerr << "error: " << stem << ": " << msg << "\n";
  auto j = eval.report.to_json();
  j["unmatched"] = eval.unmatched;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::ofstream(out) << j.dump(2) << "\n";
    fs::path csv = out;
    csv.replace_extension(".csv");
    std::ofstream(csv) << MetricReport::csv_header() << "\n" << eval.report.csv_row() << "\n";
  }
  return eval.sample_errors.empty() ? 0 : 1;
}

int run_transfer_matrix(const std::string& config, const std::string& out, bool verbose) {
  const auto cfg = ExperimentConfig::load(config);
  const auto registry = load_registry(cfg);
  const fs::path out_path = out;
  ZeroShotOptions opts;
  opts.work_dir = out_path.parent_path() / "zero_shot_sources";
  opts.verbose = verbose;
  const auto m = zero_shot_matrix(registry, cfg, opts);
  m.write_csv(out_path);
  auto raw = out_path;
  raw.replace_filename(out_path.stem().string() + "_raw.csv");
  m.write_csv(raw, false);
  auto png = out_path;
  png.replace_extension(".png");
  m.write_heatmap(png);
  for (const auto& [s, t] : m.failed) {
    std::cerr << "failed cell: " << m.sources[s] << " -> " << m.targets[t] << "\n";
  }
  std::cout << "wrote " << out_path.string() << ", " << raw.string() << ", " << png.string() << "\n";
  return m.complete() ? 0 : 1;
}

int run_group(const std::string& matrix, std::size_t k, const std::string& out) {
  const auto m = TransferMatrix::read_csv(matrix);
  const auto j = groups_to_json(top_k_groups(m, k));
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) std::ofstream(out) << j.dump(2) << "\n";
  return 0;
}

int run_report(const std::string& runs) {
  const auto grid = collect_report(runs);
  std::cout << grid.to_text();
  std::ofstream(fs::path(runs) / "report.csv") << grid.to_csv();
  return 0;
}

int run_synth(const std::string& out, const std::string& tasks, std::size_t n_train,
              std::size_t n_test, std::int64_t size, std::uint64_t seed) {
  write_synthetic_corpus(out, split_list(tasks), n_train, n_test, size, seed);
  std::cout << "wrote " << out << "/{train,test}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adapter tuning for camouflaged object detection"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log per-epoch losses");

  auto* train = app.add_subcommand("train", "Train one regime and evaluate its targets");
  std::string config, regime = "st", tasks, eval_tasks, source_ckpt, out_dir;
  std::int64_t seed = -1;
  train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--regime", regime, "st, mt, ms-st or ms-mt")
      ->check(CLI::IsMember({"st", "mt", "ms-st", "ms-mt"}));
  train->add_option("--tasks", tasks, "Comma-separated training tasks")->required();
  train->add_option("--eval-tasks", eval_tasks, "Tasks to score (default: --tasks)");
  train->add_option("--source-ckpt", source_ckpt, "Source adapter checkpoint for ms-*");
  train->add_option("--out", out_dir, "Run directory (default: train.out_dir)");
  train->add_option("--seed", seed, "Override train.seed");

  auto* eval = app.add_subcommand("eval", "Score a prediction directory against masks");
  std::string pred, gt, out;
  eval->add_option("--pred", pred, "Prediction maps")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gt", gt, "Ground-truth masks")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out, "JSON report path (a .csv is written next to it)");

  auto* matrix = app.add_subcommand("transfer-matrix", "Zero-shot transferability matrix");
  std::string matrix_out = "matrix.csv";
  matrix->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  matrix->add_option("--out", matrix_out, "Normalized matrix CSV");

  auto* group = app.add_subcommand("group", "Top-k source tasks per target");
  std::string matrix_in, groups_out;
  std::size_t k = 3;
  group->add_option("--matrix", matrix_in, "Matrix CSV")->required()->check(CLI::ExistingFile);
  group->add_option("--k", k, "Group size");
  group->add_option("--out", groups_out, "groups.json");

  auto* report = app.add_subcommand("report", "Regime x task Score grid from run directories");
  std::string runs;
  report->add_option("--runs", runs, "Directory containing result.json files")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* synth = app.add_subcommand("synth", "Write a synthetic multi-task corpus");
  std::string synth_out, synth_tasks = "TaskA,TaskB,TaskC";
  std::size_t n_train = 8, n_test = 4;
  std::int64_t size = 64;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Output root")->required();
  synth->add_option("--tasks", synth_tasks, "Task names, one style each");
  synth->add_option("--train", n_train, "Train samples per task");
  synth->add_option("--test", n_test, "Test samples per task");
  synth->add_option("--size", size, "Image side in pixels");
  synth->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);
  torch::manual_seed(0);
  try {
    if (*train) return run_train(config, regime, tasks, eval_tasks, source_ckpt, out_dir, seed, verbose);
    if (*eval) return run_eval(pred, gt, out);
    if (*matrix) return run_transfer_matrix(config, matrix_out, verbose);
    if (*group) return run_group(matrix_in, k, groups_out);
    if (*report) return run_report(runs);
    if (*synth) return run_synth(synth_out, synth_tasks, n_train, n_test, size, synth_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
