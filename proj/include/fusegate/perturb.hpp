#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusegate/data.hpp"

namespace fusegate {

enum class PerturbKind { None, GaussianNoise, SensorFailure };
enum class PerturbScope { Train, Test, Both };

// Corruption model applied to the raw stream before windowing and before
// normalization statistics are computed, so training normalization sees the
// corrupted distribution. `features` optionally restricts Gaussian noise to
// a subset of features (the fusion-weight response experiments inject noise
// into a single feature); empty means all features.
struct PerturbationSpec {
  PerturbKind kind = PerturbKind::None;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  PerturbScope scope = PerturbScope::Both;
  std::vector<std::size_t> features;

  void validate() const;
  std::string describe() const;
};

// Multiplicative Gaussian noise: every targeted component v becomes
// v * (1 + gamma * eps), eps ~ N(0,1) drawn i.i.d. per scalar. gamma == 0 is
// a bitwise identity.
SensorStream apply_noise(const SensorStream& stream, double gamma,
                         std::uint64_t seed,
                         std::span<const std::size_t> features = {});

// Random sensor failure: at every timestamp exactly one uniformly chosen
// feature value is wiped to zero. Labels are unchanged.
SensorStream apply_failures(const SensorStream& stream, std::uint64_t seed);

// Applies a spec to one split. `is_train` selects whether the spec's scope
// covers this stream; the seed is decorrelated per split.
SensorStream apply_perturbation(const SensorStream& stream,
                                const PerturbationSpec& spec, bool is_train);

// Accepts a fraction ("0.05") or percentage ("5%").
double parse_gamma(const std::string& text);

}  // namespace fusegate
