#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fusegate/data.hpp"
#include "fusegate/fusion.hpp"
#include "fusegate/optim.hpp"
#include "fusegate/perturb.hpp"

namespace fusegate {

struct DatasetSpec {
  enum class Kind { Driving, Csv };
  Kind kind = Kind::Driving;
  SyntheticDrivingConfig driving;
  std::string csv_path;            // Csv only
  bool har_labels = false;         // Csv: validate as the 6-feature HAR layout
  std::size_t decimate_factor = 1;
  std::size_t window_len = 40;
  std::size_t horizon = 20;
  std::size_t stride = 1;
  double train_fraction = 2.0 / 3.0;
  std::vector<std::vector<std::size_t>> group_override;  // empty = defaults
};

struct ArchitectureSpec {
  ArchKind kind = ArchKind::TwoStage;
  std::vector<LayerSpec> tower = default_tower_spec();
  bool gate_pre_activation = false;
};

struct TrainingSpec {
  std::size_t iterations = 3000;
  std::size_t batch_size = 32;
  OptimKind optimizer = OptimKind::Adam;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::size_t loss_every = 50;   // loss-trace cadence (iterations)
  std::size_t eval_every = 0;    // 0 = final evaluation only
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ArchitectureSpec architecture;
  PerturbationSpec perturbation;
  TrainingSpec training;
  std::string output_dir;
  bool save_model = false;

  // Fingerprint over every field that shapes the numeric result; excludes
  // output_dir and save_model so runs written to different places compare
  // equal.
  std::string fingerprint() const;
};

struct RunResult {
  double accuracy = 0.0;
  std::vector<std::pair<std::size_t, double>> loss_trace;
  std::vector<std::pair<std::size_t, double>> accuracy_trace;  // eval_every>0
  FusionReport mean_report;  // averaged over the test split
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::string architecture;
  std::string perturbation_label;
  std::uint64_t seed = 0;
  std::string fingerprint;
  double wall_seconds = 0.0;
};

// Materialized train/test splits plus the group spec in force.
struct DatasetBundle {
  WindowedDataset train;
  WindowedDataset test;
  GroupSpec groups;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
};

// Full pipeline: source stream -> temporal split -> per-split perturbation ->
// windowing -> normalization with train-split stats.
DatasetBundle build_dataset(const DatasetSpec& spec,
                            const PerturbationSpec& perturbation);

// Trains per the config and, when output_dir is set, persists results.json,
// table.csv, loss.svg and accuracy.svg there.
RunResult train(const ExperimentConfig& config);

// Exact-match accuracy over the full test split plus the mean fusion report.
std::pair<double, FusionReport> evaluate(const FusionModel& model,
                                         const WindowedDataset& test);

struct ComparisonRow {
  std::string architecture;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::vector<std::pair<std::string, double>> accuracy_by_perturbation;
};

struct ComparisonTable {
  std::vector<std::string> perturbation_labels;
  std::vector<ComparisonRow> rows;
};

// Runs configs that must differ only in architecture; one table row each.
ComparisonTable compare(const std::vector<ExperimentConfig>& configs);

// Merges single-perturbation tables produced by compare() into a grid.
ComparisonTable merge_tables(const std::vector<ComparisonTable>& tables);

// Two-row weight table (features, then groups) mirroring the fusion-weight
// analysis; with a baseline the deltas are reported too. Throws
// UnsupportedError for a non-gated run.
std::string format_weight_table(const RunResult& result,
                                const RunResult* baseline = nullptr);

}  // namespace fusegate
