#include "fusegate/layers.hpp"

#include <cmath>
#include <sstream>

#include "fusegate/errors.hpp"

namespace fusegate {

LayerSpec LayerSpec::conv1d(std::size_t channels, std::size_t kernel,
                            std::size_t stride) {
  LayerSpec s;
  s.kind = Kind::Conv1D;
  s.channels = channels;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = Kind::MaxPool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::fully_connected(std::size_t units) {
  LayerSpec s;
  s.kind = Kind::FullyConnected;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = Kind::ReLU;
  return s;
}

std::string LayerSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Conv1D:
      os << "conv1d(channels=" << channels << ", kernel=" << kernel
         << ", stride=" << stride << ")";
      break;
    case Kind::MaxPool:
      os << "maxpool(window=" << window << ", stride=" << stride << ")";
      break;
    case Kind::FullyConnected:
      os << "fc(units=" << units << ")";
      break;
    case Kind::ReLU:
      os << "relu";
      break;
  }
  return os.str();
}

bool operator==(const LayerSpec& a, const LayerSpec& b) {
  return a.kind == b.kind && a.channels == b.channels && a.kernel == b.kernel &&
         a.stride == b.stride && a.window == b.window && a.units == b.units;
}

std::vector<LayerSpec> default_tower_spec() {
  return {LayerSpec::conv1d(8, 5, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
          LayerSpec::fully_connected(32), LayerSpec::relu()};
}

namespace {

double fan_scaled_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void validate_spec(const LayerSpec& spec, std::size_t index) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("layer " + std::to_string(index) + " (" +
                      spec.describe() + "): " + why);
  };
  switch (spec.kind) {
    case LayerSpec::Kind::Conv1D:
      if (spec.channels == 0) fail("channels must be positive");
      if (spec.kernel == 0) fail("kernel must be positive");
      if (spec.stride == 0) fail("stride must be positive");
      break;
    case LayerSpec::Kind::MaxPool:
      if (spec.window == 0) fail("window must be positive");
      if (spec.stride == 0) fail("stride must be positive");
      break;
    case LayerSpec::Kind::FullyConnected:
      if (spec.units == 0) fail("units must be at least 1");
      break;
    case LayerSpec::Kind::ReLU:
      break;
  }
}

struct ShapeState {
  bool is_map;  // rank-2 [channels x len] vs rank-1 [width]
  std::size_t channels;
  std::size_t len;
  std::size_t width;

  std::size_t flat_width() const { return is_map ? channels * len : width; }
};

// Walks the layer chain, validating each transition. Shared by build() and
// param_count() so the two can never disagree.
ShapeState advance_shape(ShapeState state, const LayerSpec& spec,
                         std::size_t index) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("layer " + std::to_string(index) + " (" +
                      spec.describe() + "): " + why);
  };
  switch (spec.kind) {
    case LayerSpec::Kind::Conv1D: {
      if (!state.is_map) fail("conv1d cannot follow a fully connected layer");
      if (spec.kernel > state.len) {
        fail("kernel " + std::to_string(spec.kernel) + " exceeds length " +
             std::to_string(state.len));
      }
      state.channels = spec.channels;
      state.len = (state.len - spec.kernel) / spec.stride + 1;
      break;
    }
    case LayerSpec::Kind::MaxPool: {
      if (!state.is_map) fail("maxpool cannot follow a fully connected layer");
      if (spec.window > state.len) {
        fail("window " + std::to_string(spec.window) + " exceeds length " +
             std::to_string(state.len));
      }
      state.len = (state.len - spec.window) / spec.stride + 1;
      break;
    }
    case LayerSpec::Kind::FullyConnected: {
      state.width = spec.units;
      state.is_map = false;
      break;
    }
    case LayerSpec::Kind::ReLU:
      break;
  }
  return state;
}

}  // namespace

Dense Dense::build(std::size_t in, std::size_t out, Rng& rng,
                   const std::string& name, ParamRegistry& registry,
                   bool zero_init) {
  Dense d;
  if (zero_init) {
    d.weight_ = registry.add(name + ".weight", Tensor::zeros({out, in}, true));
  } else {
    const double bound = fan_scaled_bound(in, out);
    d.weight_ = registry.add(name + ".weight",
                             Tensor::uniform({out, in}, rng, bound, true));
  }
  d.bias_ = registry.add(name + ".bias", Tensor::zeros({out}, true));
  return d;
}

Tensor Dense::forward(const Tensor& x, Tape* tape) const {
  return linear(weight_, bias_, x, tape);
}

FeatureTower FeatureTower::build(const std::vector<LayerSpec>& specs,
                                 std::size_t in_channels, std::size_t in_len,
                                 Rng& rng, const std::string& name_prefix,
                                 ParamRegistry& registry) {
  if (in_channels == 0 || in_len == 0) {
    throw ConfigError("tower input shape must be positive, got " +
                      std::to_string(in_channels) + "x" +
                      std::to_string(in_len));
  }
  FeatureTower tower;
  tower.in_channels_ = in_channels;
  tower.in_len_ = in_len;

  ShapeState state{true, in_channels, in_len, 0};
  tower.first_fc_index_ = specs.size();
  tower.tap_width_ = state.flat_width();

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    validate_spec(spec, i);
    if (spec.kind == LayerSpec::Kind::FullyConnected &&
        tower.first_fc_index_ == specs.size()) {
      tower.first_fc_index_ = i;
      tower.tap_width_ = state.flat_width();
    }

    const ShapeState next = advance_shape(state, spec, i);  // validates chain

    Stage stage;
    stage.spec = spec;
    if (spec.kind == LayerSpec::Kind::Conv1D) {
      const std::size_t c_in = state.channels;
      const double bound =
          fan_scaled_bound(c_in * spec.kernel, spec.channels * spec.kernel);
      stage.kernels = registry.add(
          name_prefix + ".layer" + std::to_string(i) + ".kernels",
          Tensor::uniform({spec.channels, c_in, spec.kernel}, rng, bound, true));
      stage.bias =
          registry.add(name_prefix + ".layer" + std::to_string(i) + ".bias",
                       Tensor::zeros({spec.channels}, true));
    } else if (spec.kind == LayerSpec::Kind::FullyConnected) {
      stage.dense =
          Dense::build(state.flat_width(), spec.units, rng,
                       name_prefix + ".layer" + std::to_string(i), registry);
    }
    state = next;
    tower.stages_.push_back(std::move(stage));
  }

  tower.output_width_ = state.flat_width();
  if (tower.first_fc_index_ == specs.size()) {
    tower.tap_width_ = state.flat_width();
  }
  return tower;
}

std::size_t FeatureTower::param_count(const std::vector<LayerSpec>& specs,
                                      std::size_t in_channels,
                                      std::size_t in_len) {
  ShapeState state{true, in_channels, in_len, 0};
  std::size_t count = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    validate_spec(spec, i);
    if (spec.kind == LayerSpec::Kind::Conv1D) {
      const std::size_t c_in = state.is_map ? state.channels : 1;
      count += spec.channels * c_in * spec.kernel + spec.channels;
    } else if (spec.kind == LayerSpec::Kind::FullyConnected) {
      count += spec.units * state.flat_width() + spec.units;
    }
    state = advance_shape(state, spec, i);
  }
  return count;
}

TowerOutput FeatureTower::forward(const Tensor& x, Tape* tape) const {
  if (x.rank() != 2 || x.extent(0) != in_channels_ || x.extent(1) != in_len_) {
    throw DimensionError("tower: expected input [" +
                         std::to_string(in_channels_) + "x" +
                         std::to_string(in_len_) + "], got " +
                         shape_to_string(x.shape()));
  }
  Tensor state = x;
  bool is_map = true;
  Tensor tap;
  Tensor pre_activation;

  auto flat = [&](const Tensor& t) { return is_map ? flatten(t, tape) : t; };

  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const Stage& stage = stages_[i];
    if (i == first_fc_index_) {
      state = flat(state);
      is_map = false;
      tap = state;
    }
    switch (stage.spec.kind) {
      case LayerSpec::Kind::Conv1D:
        state = conv1d(state, stage.kernels, stage.bias, stage.spec.stride,
                       tape);
        break;
      case LayerSpec::Kind::MaxPool:
        state = maxpool1d(state, stage.spec.window, stage.spec.stride, tape);
        break;
      case LayerSpec::Kind::FullyConnected:
        state = stage.dense.forward(state, tape);
        break;
      case LayerSpec::Kind::ReLU:
        pre_activation = state;
        state = relu(state, tape);
        break;
    }
  }
  if (is_map) {
    state = flat(state);
    is_map = false;
    tap = state;
  }

  TowerOutput out;
  out.output = state;
  // pre_activation only differs from output when the tower ends in ReLU.
  const bool ends_in_relu =
      !stages_.empty() && stages_.back().spec.kind == LayerSpec::Kind::ReLU;
  if (ends_in_relu && pre_activation.valid()) {
    out.pre_activation = pre_activation.rank() == 2
                             ? flatten(pre_activation, tape)
                             : pre_activation;
  } else {
    out.pre_activation = state;
  }
  out.conv_tap = tap;
  return out;
}

}  // namespace fusegate
