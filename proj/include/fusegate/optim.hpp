#pragma once

#include <cstddef>
#include <vector>

#include "fusegate/params.hpp"

namespace fusegate {

enum class OptimKind { Sgd, Adam };

struct OptimizerConfig {
  OptimKind kind = OptimKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order parameter updater. Adam keeps bias-corrected first/second
// moment buffers per parameter; SGD is plain p -= lr * g. step() consumes
// the gradients left by backward() and zeroes them afterward.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<NamedParam> params);

  void step();

  std::size_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<NamedParam>& params() const { return params_; }

 private:
  OptimizerConfig config_;
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> first_moment_;   // Adam only
  std::vector<std::vector<double>> second_moment_;  // Adam only
  std::size_t step_count_ = 0;
};

}  // namespace fusegate
