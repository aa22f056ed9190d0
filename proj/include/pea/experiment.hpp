#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pea/data.hpp"
#include "pea/model.hpp"
#include "pea/trainer.hpp"

namespace pea {

struct DataSource {
  enum class Kind { Synthetic, Idx };
  Kind kind = Kind::Synthetic;

  // Synthetic
  std::size_t n_train = 10000;
  std::size_t n_val = 2000;
  std::size_t num_classes = 10;
  double noise = 0.5;
  std::uint64_t seed = 0;
  SynthGeometry geometry{};

  // Idx
  std::filesystem::path train_images, train_labels, val_images, val_labels;

  bool operator==(const DataSource&) const = default;
};

struct LoadedData {
  Dataset train;
  Dataset val;
};

/// Validation data is standardised with the training statistics.
LoadedData load_data(const DataSource& source);

struct ExperimentConfig {
  std::string name = "experiment";
  ModelSpec model;
  TrainConfig train;
  DataSource data;
  std::filesystem::path output_dir;  // empty: nothing written

  /// Full validation, including model/data agreement. ConfigError names the field.
  void validate() const;
};

struct RunResult {
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> history;
  /// Selected checkpoint: best val_acc among final-phase epochs (alpha = 1)
  /// for PEA runs, among all epochs otherwise; ties go to the later epoch.
  int selected_epoch = 0;
  MetricsRecord selected;
  Model selected_model;
  Model final_model;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single run
  double min = 0.0;
  double max = 0.0;
};

struct ExperimentSummary {
  std::string name;
  int n_runs = 0;
  MetricSummary val_acc;
  MetricSummary val_loss;
  MetricSummary train_acc;
  MetricSummary train_loss;
  std::vector<int> selected_epochs;
  std::vector<double> per_run_val_acc;
  std::optional<std::filesystem::path> export_path;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  ExperimentSummary summary;
};

MetricSummary summarize(const std::vector<double>& values);

/// Index of the selected epoch record in `history` under the rule above.
std::size_t select_checkpoint(const std::vector<MetricsRecord>& history);

/// Runs n_runs trainings with seeds seed+0..n_runs-1 (all equal to seed when
/// vary_seeds is false). With an output_dir it writes metrics.csv, summary.csv,
/// per-run checkpoints and, for PEA runs, the collapsed export of run 0's
/// selected model.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int n_runs, bool vary_seeds = true);

/// Selected-epoch val accuracies of two experiments and their comparison.
struct Comparison {
  std::vector<double> a, b, deltas;  // deltas = b - a per seed
  MetricSummary delta;
  double pooled_std = 0.0;  // sqrt((sa² + sb²) / 2)
  bool inconclusive = false;  // |mean delta| < 2·pooled_std
};

Comparison compare_runs(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace pea
