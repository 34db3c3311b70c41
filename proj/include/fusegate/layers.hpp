#pragma once

#include <string>
#include <vector>

#include "fusegate/ops.hpp"
#include "fusegate/params.hpp"
#include "fusegate/rng.hpp"

namespace fusegate {

// Declarative layer description; towers are assembled from lists of these.
struct LayerSpec {
  enum class Kind { Conv1D, MaxPool, FullyConnected, ReLU };

  Kind kind = Kind::ReLU;
  std::size_t channels = 0;  // Conv1D output channels
  std::size_t kernel = 0;    // Conv1D kernel size
  std::size_t stride = 1;    // Conv1D / MaxPool stride
  std::size_t window = 0;    // MaxPool window
  std::size_t units = 0;     // FullyConnected output units

  static LayerSpec conv1d(std::size_t channels, std::size_t kernel,
                          std::size_t stride = 1);
  static LayerSpec maxpool(std::size_t window, std::size_t stride);
  static LayerSpec fully_connected(std::size_t units);
  static LayerSpec relu();

  std::string describe() const;
};

bool operator==(const LayerSpec& a, const LayerSpec& b);

// Default per-feature tower used by every architecture when the experiment
// config does not override it: Conv1D(8, k=5) -> ReLU -> MaxPool(2,2) ->
// FC(32) -> ReLU.
std::vector<LayerSpec> default_tower_spec();

// One fully connected layer with named parameters.
class Dense {
 public:
  Dense() = default;
  // zero_init starts the layer at the symmetric point (used for gating
  // heads, whose softmax then opens at exactly uniform weights).
  static Dense build(std::size_t in, std::size_t out, Rng& rng,
                     const std::string& name, ParamRegistry& registry,
                     bool zero_init = false);
  Tensor forward(const Tensor& x, Tape* tape) const;
  std::size_t in_width() const { return weight_.extent(1); }
  std::size_t out_width() const { return weight_.extent(0); }

 private:
  Tensor weight_;
  Tensor bias_;
};

struct TowerOutput {
  Tensor output;          // final rank-1 representation
  Tensor pre_activation;  // input of the trailing ReLU, if any, else output
  Tensor conv_tap;        // flattened value at the conv/pool stage boundary
};

// A per-feature (or per-group) processing stack: the "conv -> pool -> FC"
// boxes of the fusion figures. The conv stage is everything before the first
// FullyConnected layer; its flattened output is exposed as conv_tap for the
// two-stage architecture's group path.
class FeatureTower {
 public:
  FeatureTower() = default;

  // Validates the shape chain for [in_channels x in_len] input, allocates
  // and registers parameters. Throws ConfigError citing the first failing
  // layer on an invalid chain.
  static FeatureTower build(const std::vector<LayerSpec>& specs,
                            std::size_t in_channels, std::size_t in_len,
                            Rng& rng, const std::string& name_prefix,
                            ParamRegistry& registry);

  TowerOutput forward(const Tensor& x, Tape* tape) const;

  std::size_t output_width() const { return output_width_; }
  std::size_t tap_width() const { return tap_width_; }
  std::size_t in_channels() const { return in_channels_; }
  std::size_t in_len() const { return in_len_; }

  // Parameter count implied by (spec, input shape); pure shape arithmetic.
  static std::size_t param_count(const std::vector<LayerSpec>& specs,
                                 std::size_t in_channels, std::size_t in_len);

 private:
  struct Stage {
    LayerSpec spec;
    Tensor kernels;  // Conv1D
    Tensor bias;     // Conv1D
    Dense dense;     // FullyConnected
  };

  std::vector<Stage> stages_;
  std::size_t in_channels_ = 0;
  std::size_t in_len_ = 0;
  std::size_t output_width_ = 0;
  std::size_t tap_width_ = 0;
  std::size_t first_fc_index_ = 0;  // == stages_.size() when no FC layer
};

}  // namespace fusegate
