// fusegate - gated sensor-fusion experiment runner.
//
// Subcommands:
//   train     run one training experiment from a config file
//   compare   run an architecture x perturbation grid and emit the table
//   inspect   print mean fusion weights of a finished run (optionally deltas
//             against a baseline run)
//   gen-data  write a synthetic driving-mode stream as CSV

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fusegate/config.hpp"
#include "fusegate/data.hpp"
#include "fusegate/errors.hpp"
#include "fusegate/experiment.hpp"
#include "fusegate/report.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& out_override) {
  fusegate::ExperimentConfig config =
      fusegate::load_experiment_config(config_path);
  if (!out_override.empty()) config.output_dir = out_override;
  fusegate::RunResult result = fusegate::train(config);
  std::printf("architecture   %s\n", result.architecture.c_str());
  std::printf("perturbation   %s\n", result.perturbation_label.c_str());
  std::printf("train/test     %zu / %zu windows\n", result.n_train,
              result.n_test);
  std::printf("test accuracy  %.4f\n", result.accuracy);
  if (!result.loss_trace.empty()) {
    std::printf("final loss     %.6f (iteration %zu)\n",
                result.loss_trace.back().second,
                result.loss_trace.back().first);
  }
  std::printf("wall time      %.1fs\n", result.wall_seconds);
  if (!config.output_dir.empty()) {
    std::printf("reports        %s/{results.json,table.csv,loss.svg,accuracy.svg}\n",
                config.output_dir.c_str());
  }
  return 0;
}

int cmd_compare(const std::string& config_path,
                const std::string& out_override) {
  fusegate::CompareConfig grid = fusegate::load_compare_config(config_path);
  if (!out_override.empty()) grid.output_dir = out_override;

  std::vector<fusegate::ComparisonTable> tables;
  for (const fusegate::PerturbationSpec& perturb : grid.perturbations) {
    std::vector<fusegate::ExperimentConfig> configs;
    for (fusegate::ArchKind kind : grid.architectures) {
      fusegate::ExperimentConfig cfg = grid.base;
      cfg.architecture.kind = kind;
      cfg.perturbation = perturb;
      if (!grid.output_dir.empty()) {
        cfg.output_dir = grid.output_dir + "/" + perturb.describe() + "_" +
                         fusegate::arch_kind_name(kind);
      }
      configs.push_back(std::move(cfg));
    }
    std::fprintf(stderr, "running %zu architectures under '%s'...\n",
                 configs.size(), perturb.describe().c_str());
    tables.push_back(fusegate::compare(configs));
  }
  fusegate::ComparisonTable merged = fusegate::merge_tables(tables);

  // Text summary, one row per architecture like the accuracy tables.
  std::printf("%-12s", "network");
  for (const std::string& label : merged.perturbation_labels) {
    std::printf("  %14s", label.c_str());
  }
  std::printf("\n");
  for (const auto& row : merged.rows) {
    std::printf("%-12s", row.architecture.c_str());
    for (const auto& [label, acc] : row.accuracy_by_perturbation) {
      std::printf("  %13.2f%%", 100.0 * acc);
    }
    std::printf("\n");
  }

  if (!grid.output_dir.empty()) {
    std::filesystem::create_directories(grid.output_dir);
    const std::string csv = grid.output_dir + "/table.csv";
    fusegate::write_comparison_csv(merged, csv);
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& row : merged.rows) {
      bars.emplace_back(row.architecture,
                        row.accuracy_by_perturbation.back().second);
    }
    fusegate::write_accuracy_svg(
        bars, "accuracy (" + merged.perturbation_labels.back() + ")",
        grid.output_dir + "/accuracy.svg");
    std::printf("table          %s\n", csv.c_str());
  }
  return 0;
}

int cmd_inspect(const std::string& run_dir, const std::string& baseline_dir) {
  fusegate::RunResult result =
      fusegate::read_run_result(run_dir + "/results.json");
  if (baseline_dir.empty()) {
    std::printf("%s", fusegate::format_weight_table(result).c_str());
  } else {
    fusegate::RunResult baseline =
        fusegate::read_run_result(baseline_dir + "/results.json");
    std::printf("%s",
                fusegate::format_weight_table(result, &baseline).c_str());
  }
  return 0;
}

int cmd_gen_data(const std::string& kind, const std::string& out_path,
                 std::size_t length, std::uint64_t seed) {
  if (kind != "driving") {
    throw fusegate::ConfigError("gen-data: unknown kind '" + kind +
                                "' (only 'driving' is generated)");
  }
  fusegate::SyntheticDrivingConfig cfg;
  cfg.length = length;
  cfg.seed = seed;
  fusegate::SensorStream stream = fusegate::generate_driving(cfg);
  fusegate::write_stream_csv(stream, out_path);
  std::printf("wrote %zu samples x %zu features to %s\n", stream.length(),
              stream.n_features(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated sensor-fusion experiments"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  auto* train = app.add_subcommand("train", "run one training experiment");
  train->add_option("--config", config_path, "experiment config file")
      ->required();
  train->add_option("--out", out_override, "override the output directory");

  std::string cmp_config, cmp_out;
  auto* compare = app.add_subcommand("compare", "run a comparison grid");
  compare->add_option("--config", cmp_config, "comparison config file")
      ->required();
  compare->add_option("--out", cmp_out, "override the output directory");

  std::string run_dir, baseline_dir;
  auto* inspect = app.add_subcommand("inspect", "print mean fusion weights");
  inspect->add_option("--run", run_dir, "run directory with results.json")
      ->required();
  inspect->add_option("--baseline", baseline_dir,
                      "baseline run directory for deltas");

  std::string gen_kind = "driving", gen_out;
  std::size_t gen_length = 20000;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic stream CSV");
  gen->add_option("--kind", gen_kind, "dataset kind (driving)");
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--length", gen_length, "number of samples");
  gen->add_option("--seed", gen_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) return cmd_train(config_path, out_override);
    if (app.got_subcommand(compare)) return cmd_compare(cmp_config, cmp_out);
    if (app.got_subcommand(inspect)) return cmd_inspect(run_dir, baseline_dir);
    if (app.got_subcommand(gen)) {
      return cmd_gen_data(gen_kind, gen_out, gen_length, gen_seed);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
