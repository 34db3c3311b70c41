#pragma once

// Central finite-difference gradient checking. Lives in test code only; the
// numeric side is rebuilt from forward evaluations alone, so it stays
// independent of the backward path it verifies.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusegate/tape.hpp"
#include "fusegate/tensor.hpp"

namespace fusegate::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[i]" of the worst entry
};

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / denom;
}

// loss_builder(tape) must rebuild the forward pass from the current
// parameter values, recording on `tape` when non-null, and return the
// scalar loss tensor. Parameters are perturbed in place.
inline GradCheckResult check_gradients(
    const std::function<Tensor(Tape*)>& loss_builder,
    std::vector<std::pair<std::string, Tensor>> params, double h = 1e-5) {
  Tape tape;
  Tensor loss = loss_builder(&tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (auto& [name, param] : params) {
    if (!param.has_grad()) {
      throw std::runtime_error("grad check: no gradient on " + name);
    }
    analytic.emplace_back(param.grad().begin(), param.grad().end());
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].second.data_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss_builder(nullptr).item();
      values[i] = saved - h;
      const double down = loss_builder(nullptr).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = rel_error(analytic[p][i], numeric);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = params[p].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace fusegate::testing
