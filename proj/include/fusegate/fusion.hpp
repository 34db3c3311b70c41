#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fusegate/layers.hpp"
#include "fusegate/params.hpp"

namespace fusegate {

enum class ArchKind { NonGated, NetGated, FgGfa, TwoStage };

std::string arch_kind_name(ArchKind kind);
ArchKind arch_kind_from_name(const std::string& name);

// Partition of feature indices 0..N-1 into M disjoint, nonempty, ordered
// groups. Group order and within-group order fix concatenation order.
struct GroupSpec {
  std::vector<std::vector<std::size_t>> groups;

  // Throws ConfigError unless groups form a partition of 0..n_features-1.
  void validate(std::size_t n_features) const;
  std::size_t count() const { return groups.size(); }
  std::size_t group_of(std::size_t feature) const;
  std::string describe() const;
};

// Per-forward gating snapshot. Weight vectors present per architecture:
//   NonGated : none
//   NetGated : feature_weights (final == feature)
//   FG-GFA   : group_weights (final[i] == group weight of i's group)
//   TwoStage : all three; final[i] == feature[i] * group[group_of(i)]
struct FusionReport {
  std::vector<double> feature_weights;
  std::vector<double> group_weights;
  std::vector<double> final_weights;
};

// Replaces the computed gate vectors with fixed constants for one forward.
// Used to probe gating semantics (e.g. a zeroed weight must cut the gated
// feature out of the network entirely).
struct GateOverride {
  std::optional<std::vector<double>> feature_weights;
  std::optional<std::vector<double>> group_weights;
};

struct ModelConfig {
  ArchKind kind = ArchKind::NonGated;
  std::size_t n_features = 0;
  std::size_t window_len = 0;
  std::size_t n_classes = 0;
  std::vector<LayerSpec> tower;
  GroupSpec groups;  // FG-GFA / TwoStage only
  // When true the gating heads read the pre-activation tower outputs.
  bool gate_pre_activation = false;
  std::uint64_t init_seed = 1;

  // Canonical description of every architecture-determining field; the
  // fingerprint is an FNV-1a hash of it.
  std::string canonical() const;
  std::string fingerprint() const;
};

struct ForwardOutput {
  Tensor logits;
  FusionReport report;
};

// One of the four compared fusion networks, with named parameters and a
// forward pass that yields logits plus the gating report.
class FusionModel {
 public:
  FusionModel() = default;

  static FusionModel build(const ModelConfig& config);

  ForwardOutput forward(const Tensor& window, Tape* tape,
                        const GateOverride* override_gates = nullptr) const;

  ArchKind kind() const { return config_.kind; }
  const ModelConfig& config() const { return config_; }
  const std::vector<NamedParam>& parameters() const { return registry_.all(); }
  const Tensor* parameter(const std::string& name) const {
    return registry_.find(name);
  }
  std::size_t parameter_count() const { return registry_.total_size(); }

  // Versioned structured-text parameter archive keyed by the config
  // fingerprint; load rejects an archive built for a different config.
  void save(const std::string& path) const;
  static FusionModel load(const std::string& path, const ModelConfig& config);

 private:
  ModelConfig config_;
  ParamRegistry registry_;
  std::vector<FeatureTower> towers_;        // per feature (not FG-GFA)
  std::vector<FeatureTower> group_towers_;  // FG-GFA
  Dense fc_con_;    // feature- or group-level gating head
  Dense fc_con_g_;  // TwoStage group-level gating head
  Dense fc_out_;    // output head
};

// Spec'd builders for the four compared architectures.
FusionModel build_non_gated(std::size_t n_features, std::size_t window_len,
                            std::size_t n_classes,
                            const std::vector<LayerSpec>& tower_spec,
                            std::uint64_t seed = 1);
FusionModel build_netgated(std::size_t n_features, std::size_t window_len,
                           std::size_t n_classes,
                           const std::vector<LayerSpec>& tower_spec,
                           std::uint64_t seed = 1);
FusionModel build_fg_gfa(std::size_t n_features, std::size_t window_len,
                         std::size_t n_classes, const GroupSpec& groups,
                         const std::vector<LayerSpec>& tower_spec,
                         std::uint64_t seed = 1);
FusionModel build_two_stage(std::size_t n_features, std::size_t window_len,
                            std::size_t n_classes, const GroupSpec& groups,
                            const std::vector<LayerSpec>& tower_spec,
                            std::uint64_t seed = 1);

}  // namespace fusegate
