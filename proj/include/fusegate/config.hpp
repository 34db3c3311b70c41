#pragma once

#include <string>
#include <vector>

#include "fusegate/experiment.hpp"

namespace fusegate {

// Experiment config file handling (JSON; nested key/value sections).
// Unknown keys anywhere in the document are rejected with a ConfigError
// naming the offending path.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string serialize_experiment_config(const ExperimentConfig& config);

// Comparison grid config: a base experiment plus architecture and
// perturbation lists.
struct CompareConfig {
  ExperimentConfig base;
  std::vector<ArchKind> architectures;
  std::vector<PerturbationSpec> perturbations;
  std::string output_dir;
};

CompareConfig parse_compare_config(const std::string& json_text);
CompareConfig load_compare_config(const std::string& path);

}  // namespace fusegate
