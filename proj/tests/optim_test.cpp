#include <cmath>

#include "doctest.h"
#include "fusegate/errors.hpp"
#include "fusegate/ops.hpp"
#include "fusegate/optim.hpp"

using namespace fusegate;

TEST_CASE("sgd single step") {
  Tensor p = Tensor::scalar(1.0, true);
  p.grad_mut()[0] = 2.0;
  OptimizerConfig cfg;
  cfg.kind = OptimKind::Sgd;
  cfg.learning_rate = 0.1;
  Optimizer opt(cfg, {{"p", p}});
  opt.step();
  CHECK(p.item() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(opt.step_count() == 1);
  // Gradients are zeroed after the step.
  CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("adam first step equals -lr under unit gradient") {
  Tensor p = Tensor::scalar(0.0, true);
  p.grad_mut()[0] = 1.0;
  OptimizerConfig cfg;  // defaults: adam, lr 1e-3, b1 0.9, b2 0.999, eps 1e-8
  Optimizer opt(cfg, {{"p", p}});
  opt.step();
  // Bias correction makes m_hat = v_hat = 1, so the update is
  // -lr / (1 + eps) which is -lr up to 1e-8 relative.
  CHECK(p.item() == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("sgd converges on least squares y=2x") {
  // Closed-form oracle: minimizing sum_i (w*x_i - 2*x_i)^2 has w* = 2.
  Tensor w = Tensor::scalar(0.0, true);
  OptimizerConfig cfg;
  cfg.kind = OptimKind::Sgd;
  cfg.learning_rate = 0.05;
  Optimizer opt(cfg, {{"w", w}});
  const double xs[] = {0.5, 1.0, 1.5, 2.0};
  for (int step = 0; step < 200; ++step) {
    Tape tape;
    std::vector<Tensor> losses;
    for (double x : xs) {
      Tensor xv = Tensor::scalar(x, false);
      Tensor pred = hadamard(w, xv, &tape);
      Tensor target = Tensor::scalar(2.0 * x, false);
      Tensor neg = scale(target, -1.0, &tape);
      Tensor diff = add(pred, neg, &tape);
      losses.push_back(hadamard(diff, diff, &tape));
    }
    Tensor loss = scale(add_n(losses, &tape), 0.25, &tape);
    tape.backward(loss);
    opt.step();
  }
  CHECK(std::fabs(w.item() - 2.0) < 1e-3);
  CHECK(opt.step_count() == 200);
}

TEST_CASE("missing gradient is a contract error naming the parameter") {
  Tensor p = Tensor::scalar(1.0, true);
  Optimizer opt(OptimizerConfig{}, {{"tower0.layer0.bias", p}});
  bool threw = false;
  try {
    opt.step();
  } catch (const ContractError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("tower0.layer0.bias") !=
          std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("adam converges on a quadratic") {
  Tensor p = Tensor::scalar(0.0, true);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  Optimizer opt(cfg, {{"p", p}});
  for (int i = 0; i < 1000; ++i) {
    p.grad_mut()[0] = 2.0 * (p.item() - 3.0);
    opt.step();
  }
  CHECK(std::fabs(p.item() - 3.0) < 1e-4);
}
