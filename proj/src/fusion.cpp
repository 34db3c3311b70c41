#include "fusegate/fusion.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fusegate/errors.hpp"

namespace fusegate {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace

std::string arch_kind_name(ArchKind kind) {
  switch (kind) {
    case ArchKind::NonGated: return "non_gated";
    case ArchKind::NetGated: return "netgated";
    case ArchKind::FgGfa: return "fg_gfa";
    case ArchKind::TwoStage: return "two_stage";
  }
  return "unknown";
}

ArchKind arch_kind_from_name(const std::string& name) {
  if (name == "non_gated") return ArchKind::NonGated;
  if (name == "netgated") return ArchKind::NetGated;
  if (name == "fg_gfa") return ArchKind::FgGfa;
  if (name == "two_stage") return ArchKind::TwoStage;
  throw ConfigError("unknown architecture kind '" + name + "'");
}

void GroupSpec::validate(std::size_t n_features) const {
  if (groups.empty()) {
    throw ConfigError("group spec: at least one group is required");
  }
  std::vector<bool> seen(n_features, false);
  std::size_t covered = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) {
      throw ConfigError("group spec: group " + std::to_string(g) +
                        " is empty");
    }
    for (std::size_t f : groups[g]) {
      if (f >= n_features) {
        throw ConfigError("group spec: feature index " + std::to_string(f) +
                          " out of range for " + std::to_string(n_features) +
                          " features");
      }
      if (seen[f]) {
        throw ConfigError("group spec: feature " + std::to_string(f) +
                          " appears in more than one group");
      }
      seen[f] = true;
      ++covered;
    }
  }
  if (covered != n_features) {
    throw ConfigError("group spec: groups cover " + std::to_string(covered) +
                      " of " + std::to_string(n_features) + " features");
  }
}

std::size_t GroupSpec::group_of(std::size_t feature) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (std::find(groups[g].begin(), groups[g].end(), feature) !=
        groups[g].end()) {
      return g;
    }
  }
  throw ConfigError("group spec: feature " + std::to_string(feature) +
                    " not assigned to any group");
}

std::string GroupSpec::describe() const {
  std::ostringstream os;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) os << '/';
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      if (i) os << ',';
      os << groups[g][i];
    }
  }
  return os.str();
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "kind=" << arch_kind_name(kind) << ";n_features=" << n_features
     << ";window_len=" << window_len << ";n_classes=" << n_classes
     << ";tower=";
  for (std::size_t i = 0; i < tower.size(); ++i) {
    if (i) os << '|';
    os << tower[i].describe();
  }
  os << ";groups=" << groups.describe()
     << ";gate_pre_activation=" << (gate_pre_activation ? 1 : 0);
  return os.str();
}

std::string ModelConfig::fingerprint() const { return hex64(fnv1a(canonical())); }

FusionModel FusionModel::build(const ModelConfig& config) {
  if (config.n_features == 0) {
    throw ConfigError("model: n_features must be at least 1");
  }
  if (config.window_len == 0) {
    throw ConfigError("model: window_len must be positive");
  }
  if (config.n_classes < 2) {
    throw ConfigError("model: n_classes must be at least 2");
  }
  const bool gated = config.kind != ArchKind::NonGated;
  if (gated && config.kind != ArchKind::FgGfa && config.n_features < 2) {
    throw ConfigError("model: " + arch_kind_name(config.kind) +
                      " requires at least 2 features (gating is meaningless "
                      "for a single input)");
  }
  const bool grouped =
      config.kind == ArchKind::FgGfa || config.kind == ArchKind::TwoStage;
  if (grouped) config.groups.validate(config.n_features);

  FusionModel model;
  model.config_ = config;
  Rng rng(config.init_seed);

  const std::size_t n = config.n_features;
  const std::size_t t_len = config.window_len;

  if (config.kind == ArchKind::FgGfa) {
    // Within-group early fusion: each group's raw windows stack as input
    // channels of one group tower.
    std::size_t gate_in = 0;
    for (std::size_t g = 0; g < config.groups.count(); ++g) {
      const std::size_t k_g = config.groups.groups[g].size();
      model.group_towers_.push_back(
          FeatureTower::build(config.tower, k_g, t_len, rng,
                              "group" + std::to_string(g), model.registry_));
      gate_in += model.group_towers_.back().output_width();
    }
    model.fc_con_ = Dense::build(gate_in, config.groups.count(), rng, "fc_con",
                                 model.registry_, /*zero_init=*/true);
    model.fc_out_ =
        Dense::build(gate_in, config.n_classes, rng, "fc_out", model.registry_);
    return model;
  }

  std::size_t concat_width = 0;
  std::size_t tap_width = 0;
  for (std::size_t i = 0; i < n; ++i) {
    model.towers_.push_back(FeatureTower::build(
        config.tower, 1, t_len, rng, "tower" + std::to_string(i),
        model.registry_));
    concat_width += model.towers_.back().output_width();
    tap_width += model.towers_.back().tap_width();
  }
  if (config.kind == ArchKind::NetGated || config.kind == ArchKind::TwoStage) {
    model.fc_con_ = Dense::build(concat_width, n, rng, "fc_con",
                                 model.registry_, /*zero_init=*/true);
  }
  if (config.kind == ArchKind::TwoStage) {
    model.fc_con_g_ = Dense::build(tap_width, config.groups.count(), rng,
                                   "fc_con_g", model.registry_,
                                   /*zero_init=*/true);
  }
  model.fc_out_ = Dense::build(concat_width, config.n_classes, rng, "fc_out",
                               model.registry_);
  return model;
}

namespace {

// Materializes an override vector as a constant (off-tape) gate tensor.
Tensor override_tensor(const std::vector<double>& values, std::size_t expect,
                       const char* which) {
  if (values.size() != expect) {
    throw ContractError(std::string("gate override: ") + which + " expects " +
                        std::to_string(expect) + " entries, got " +
                        std::to_string(values.size()));
  }
  return Tensor::from_data({values.size()}, values, false);
}

std::vector<std::size_t> ones(std::size_t n) {
  return std::vector<std::size_t>(n, 1);
}

}  // namespace

ForwardOutput FusionModel::forward(const Tensor& window, Tape* tape,
                                   const GateOverride* override_gates) const {
  const std::size_t n = config_.n_features;
  if (window.rank() != 2 || window.extent(0) != n ||
      window.extent(1) != config_.window_len) {
    throw DimensionError(
        "forward: expected window [" + std::to_string(n) + "x" +
        std::to_string(config_.window_len) + "], got " +
        shape_to_string(window.shape()));
  }
  if (override_gates) {
    if (override_gates->feature_weights &&
        (config_.kind == ArchKind::NonGated ||
         config_.kind == ArchKind::FgGfa)) {
      throw UnsupportedError("gate override: " + arch_kind_name(config_.kind) +
                             " has no feature-level weights");
    }
    if (override_gates->group_weights &&
        (config_.kind == ArchKind::NonGated ||
         config_.kind == ArchKind::NetGated)) {
      throw UnsupportedError("gate override: " + arch_kind_name(config_.kind) +
                             " has no group-level weights");
    }
  }

  ForwardOutput out;

  if (config_.kind == ArchKind::FgGfa) {
    const std::size_t m = config_.groups.count();
    std::vector<Tensor> group_out, gate_in;
    group_out.reserve(m);
    gate_in.reserve(m);
    for (std::size_t g = 0; g < m; ++g) {
      Tensor gin = gather_rows(window, config_.groups.groups[g], tape);
      TowerOutput tout = group_towers_[g].forward(gin, tape);
      group_out.push_back(tout.output);
      gate_in.push_back(config_.gate_pre_activation ? tout.pre_activation
                                                    : tout.output);
    }
    Tensor gates;
    if (override_gates && override_gates->group_weights) {
      gates = override_tensor(*override_gates->group_weights, m, "group");
    } else {
      gates = softmax(fc_con_.forward(concat(gate_in, tape), tape), tape);
    }
    std::vector<Tensor> gate_scalars = split(gates, ones(m), tape);
    std::vector<Tensor> weighted;
    weighted.reserve(m);
    for (std::size_t g = 0; g < m; ++g) {
      weighted.push_back(hadamard(gate_scalars[g], group_out[g], tape));
    }
    out.logits = fc_out_.forward(concat(weighted, tape), tape);
    auto gv = gates.data();
    out.report.group_weights.assign(gv.begin(), gv.end());
    out.report.final_weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.report.final_weights[i] = gv[config_.groups.group_of(i)];
    }
    return out;
  }

  // Per-feature towers (NonGated, NetGated, TwoStage).
  std::vector<Tensor> rows = split(window, ones(n), tape);
  std::vector<Tensor> feat_out, gate_in, taps;
  feat_out.reserve(n);
  gate_in.reserve(n);
  taps.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TowerOutput tout = towers_[i].forward(rows[i], tape);
    feat_out.push_back(tout.output);
    gate_in.push_back(config_.gate_pre_activation ? tout.pre_activation
                                                  : tout.output);
    taps.push_back(tout.conv_tap);
  }

  if (config_.kind == ArchKind::NonGated) {
    out.logits = fc_out_.forward(concat(feat_out, tape), tape);
    return out;
  }

  Tensor feature_gates;
  if (override_gates && override_gates->feature_weights) {
    feature_gates =
        override_tensor(*override_gates->feature_weights, n, "feature");
  } else {
    feature_gates =
        softmax(fc_con_.forward(concat(gate_in, tape), tape), tape);
  }
  std::vector<Tensor> feature_scalars = split(feature_gates, ones(n), tape);

  if (config_.kind == ArchKind::NetGated) {
    std::vector<Tensor> weighted;
    weighted.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      weighted.push_back(hadamard(feature_scalars[i], feat_out[i], tape));
    }
    out.logits = fc_out_.forward(concat(weighted, tape), tape);
    auto fv = feature_gates.data();
    out.report.feature_weights.assign(fv.begin(), fv.end());
    out.report.final_weights = out.report.feature_weights;
    return out;
  }

  // TwoStage: group path reuses the per-feature conv-stage outputs,
  // concatenated within each group, then across groups.
  const std::size_t m = config_.groups.count();
  Tensor group_gates;
  if (override_gates && override_gates->group_weights) {
    group_gates = override_tensor(*override_gates->group_weights, m, "group");
  } else {
    std::vector<Tensor> group_cat;
    group_cat.reserve(m);
    for (std::size_t g = 0; g < m; ++g) {
      std::vector<Tensor> members;
      members.reserve(config_.groups.groups[g].size());
      for (std::size_t f : config_.groups.groups[g]) members.push_back(taps[f]);
      group_cat.push_back(concat(members, tape));
    }
    group_gates =
        softmax(fc_con_g_.forward(concat(group_cat, tape), tape), tape);
  }
  std::vector<Tensor> group_scalars = split(group_gates, ones(m), tape);

  // Final weight of feature i is the product of its feature-level weight
  // and its group's group-level weight; no renormalization afterwards.
  std::vector<Tensor> weighted;
  weighted.reserve(n);
  out.report.final_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor final_w = hadamard(feature_scalars[i],
                              group_scalars[config_.groups.group_of(i)], tape);
    out.report.final_weights[i] = final_w.item();
    weighted.push_back(hadamard(final_w, feat_out[i], tape));
  }
  out.logits = fc_out_.forward(concat(weighted, tape), tape);
  auto fv = feature_gates.data();
  auto gv = group_gates.data();
  out.report.feature_weights.assign(fv.begin(), fv.end());
  out.report.group_weights.assign(gv.begin(), gv.end());
  return out;
}

void FusionModel::save(const std::string& path) const {
  json doc;
  doc["format_version"] = 1;
  doc["fingerprint"] = config_.fingerprint();
  doc["kind"] = arch_kind_name(config_.kind);
  json params = json::object();
  for (const NamedParam& p : registry_.all()) {
    json entry;
    entry["shape"] = p.tensor.shape();
    entry["data"] = std::vector<double>(p.tensor.data().begin(),
                                        p.tensor.data().end());
    params[p.name] = std::move(entry);
  }
  doc["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing model archive '" + path + "'");
}

FusionModel FusionModel::load(const std::string& path,
                              const ModelConfig& config) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model archive '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw DataError("model archive '" + path + "' is not valid JSON: " +
                    e.what());
  }
  if (!doc.contains("format_version") || doc["format_version"] != 1) {
    throw DataError("model archive '" + path + "' has unsupported version");
  }
  const std::string expect = config.fingerprint();
  const std::string got = doc.value("fingerprint", "");
  if (got != expect) {
    throw ConfigError("model archive fingerprint " + got +
                      " does not match config fingerprint " + expect);
  }
  FusionModel model = build(config);
  const json& params = doc.at("params");
  for (const NamedParam& p : model.registry_.all()) {
    if (!params.contains(p.name)) {
      throw DataError("model archive missing parameter '" + p.name + "'");
    }
    const json& entry = params.at(p.name);
    const auto shape = entry.at("shape").get<Shape>();
    const auto data = entry.at("data").get<std::vector<double>>();
    Tensor t = p.tensor;  // shared handle
    if (shape != t.shape() || data.size() != t.size()) {
      throw DataError("model archive parameter '" + p.name +
                      "' has shape " + shape_to_string(shape) + ", expected " +
                      shape_to_string(t.shape()));
    }
    std::copy(data.begin(), data.end(), t.data_mut().begin());
  }
  return model;
}

namespace {

ModelConfig make_config(ArchKind kind, std::size_t n_features,
                        std::size_t window_len, std::size_t n_classes,
                        const std::vector<LayerSpec>& tower_spec,
                        std::uint64_t seed, GroupSpec groups = {}) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.n_features = n_features;
  cfg.window_len = window_len;
  cfg.n_classes = n_classes;
  cfg.tower = tower_spec;
  cfg.groups = std::move(groups);
  cfg.init_seed = seed;
  return cfg;
}

}  // namespace

FusionModel build_non_gated(std::size_t n_features, std::size_t window_len,
                            std::size_t n_classes,
                            const std::vector<LayerSpec>& tower_spec,
                            std::uint64_t seed) {
  return FusionModel::build(make_config(ArchKind::NonGated, n_features,
                                        window_len, n_classes, tower_spec,
                                        seed));
}

FusionModel build_netgated(std::size_t n_features, std::size_t window_len,
                           std::size_t n_classes,
                           const std::vector<LayerSpec>& tower_spec,
                           std::uint64_t seed) {
  return FusionModel::build(make_config(ArchKind::NetGated, n_features,
                                        window_len, n_classes, tower_spec,
                                        seed));
}

FusionModel build_fg_gfa(std::size_t n_features, std::size_t window_len,
                         std::size_t n_classes, const GroupSpec& groups,
                         const std::vector<LayerSpec>& tower_spec,
                         std::uint64_t seed) {
  return FusionModel::build(make_config(ArchKind::FgGfa, n_features,
                                        window_len, n_classes, tower_spec,
                                        seed, groups));
}

FusionModel build_two_stage(std::size_t n_features, std::size_t window_len,
                            std::size_t n_classes, const GroupSpec& groups,
                            const std::vector<LayerSpec>& tower_spec,
                            std::uint64_t seed) {
  return FusionModel::build(make_config(ArchKind::TwoStage, n_features,
                                        window_len, n_classes, tower_spec,
                                        seed, groups));
}

}  // namespace fusegate
