#include "fusegate/optim.hpp"

#include <cmath>

#include "fusegate/errors.hpp"

namespace fusegate {

Optimizer::Optimizer(OptimizerConfig config, std::vector<NamedParam> params)
    : config_(config), params_(std::move(params)) {
  if (config_.learning_rate <= 0.0) {
    throw ConfigError("optimizer: learning rate must be positive");
  }
  if (config_.kind == OptimKind::Adam) {
    first_moment_.reserve(params_.size());
    second_moment_.reserve(params_.size());
    for (const NamedParam& p : params_) {
      first_moment_.emplace_back(p.tensor.size(), 0.0);
      second_moment_.emplace_back(p.tensor.size(), 0.0);
    }
  }
}

void Optimizer::step() {
  for (const NamedParam& p : params_) {
    if (!p.tensor.has_grad()) {
      throw ContractError("optimizer: parameter '" + p.name +
                          "' has no gradient; run backward first");
    }
  }
  ++step_count_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimKind::Sgd) {
    for (NamedParam& p : params_) {
      auto value = p.tensor.data_mut();
      auto grad = p.tensor.grad();
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
    }
  } else {
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      auto value = params_[pi].tensor.data_mut();
      auto grad = params_[pi].tensor.grad();
      auto& m = first_moment_[pi];
      auto& v = second_moment_[pi];
      for (std::size_t i = 0; i < value.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = m[i] / corr1;
        const double v_hat = v[i] / corr2;
        value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
  }
  for (NamedParam& p : params_) p.tensor.zero_grad();
}

}  // namespace fusegate
