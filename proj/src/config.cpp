#include "fusegate/config.hpp"

#include <fstream>

#include "json.hpp"

#include "fusegate/errors.hpp"

namespace fusegate {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  throw ConfigError("config: " + path + ": " + why);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
}

// Every section lists its legal keys; anything else is rejected.
void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) bad(path.empty() ? key : path + "." + key, "unknown key");
  }
}

template <typename T>
T get_field(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(path + "." + key, "wrong type");
  }
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  return get_field<std::string>(j, path, key, fallback);
}

LayerSpec parse_layer(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string kind = get_string(j, path, "kind", "");
  if (kind == "conv1d") {
    check_keys(j, path, {"kind", "channels", "kernel", "stride"});
    return LayerSpec::conv1d(get_field<std::size_t>(j, path, "channels", 0),
                             get_field<std::size_t>(j, path, "kernel", 0),
                             get_field<std::size_t>(j, path, "stride", 1));
  }
  if (kind == "maxpool") {
    check_keys(j, path, {"kind", "window", "stride"});
    return LayerSpec::maxpool(get_field<std::size_t>(j, path, "window", 0),
                              get_field<std::size_t>(j, path, "stride", 1));
  }
  if (kind == "fc") {
    check_keys(j, path, {"kind", "units"});
    return LayerSpec::fully_connected(get_field<std::size_t>(j, path, "units", 0));
  }
  if (kind == "relu") {
    check_keys(j, path, {"kind"});
    return LayerSpec::relu();
  }
  bad(path + ".kind", "unknown layer kind '" + kind + "'");
}

std::vector<LayerSpec> parse_tower(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of layers");
  std::vector<LayerSpec> tower;
  for (std::size_t i = 0; i < j.size(); ++i) {
    tower.push_back(parse_layer(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return tower;
}

DatasetSpec parse_dataset(const json& j, const std::string& path) {
  check_keys(j, path,
             {"kind", "path", "har_labels", "decimate", "driving",
              "window_len", "horizon", "stride", "train_fraction", "groups"});
  DatasetSpec spec;
  const std::string kind = get_string(j, path, "kind", "driving");
  if (kind == "driving") {
    spec.kind = DatasetSpec::Kind::Driving;
  } else if (kind == "csv") {
    spec.kind = DatasetSpec::Kind::Csv;
  } else {
    bad(path + ".kind", "unknown dataset kind '" + kind + "'");
  }
  spec.csv_path = get_string(j, path, "path", "");
  if (spec.kind == DatasetSpec::Kind::Csv && spec.csv_path.empty()) {
    bad(path + ".path", "csv datasets require a path");
  }
  spec.har_labels = get_field<bool>(j, path, "har_labels", false);
  spec.decimate_factor = get_field<std::size_t>(j, path, "decimate", 1);
  if (j.contains("driving")) {
    const std::string dpath = path + ".driving";
    check_keys(j.at("driving"), dpath,
               {"length", "seed", "sample_period", "idle_ratio", "eco_ratio",
                "normal_ratio", "dwell_min", "dwell_max", "speed_min",
                "speed_max", "eco_slope_min", "eco_slope_max",
                "normal_slope_min", "normal_slope_max", "eco_gyro_gain_min",
                "eco_gyro_gain_max", "normal_gyro_gain_min",
                "normal_gyro_gain_max", "normal_counter_steer",
                "eco_speed_noise", "normal_speed_noise", "steer_noise",
                "eco_steer_amp_min", "eco_steer_amp_max",
                "normal_steer_amp_min", "normal_steer_amp_max",
                "rpm_stale_rate"});
    const json& d = j.at("driving");
    spec.driving.length = get_field<std::size_t>(d, dpath, "length",
                                                 spec.driving.length);
    spec.driving.seed = get_field<std::uint64_t>(d, dpath, "seed",
                                                 spec.driving.seed);
    spec.driving.sample_period =
        get_field<double>(d, dpath, "sample_period", spec.driving.sample_period);
    spec.driving.idle_ratio =
        get_field<double>(d, dpath, "idle_ratio", spec.driving.idle_ratio);
    spec.driving.eco_ratio =
        get_field<double>(d, dpath, "eco_ratio", spec.driving.eco_ratio);
    spec.driving.normal_ratio =
        get_field<double>(d, dpath, "normal_ratio", spec.driving.normal_ratio);
    spec.driving.dwell_min =
        get_field<std::size_t>(d, dpath, "dwell_min", spec.driving.dwell_min);
    spec.driving.dwell_max =
        get_field<std::size_t>(d, dpath, "dwell_max", spec.driving.dwell_max);
    auto dbl = [&](const char* key, double& slot) {
      slot = get_field<double>(d, dpath, key, slot);
    };
    dbl("speed_min", spec.driving.speed_min);
    dbl("speed_max", spec.driving.speed_max);
    dbl("eco_slope_min", spec.driving.eco_slope_min);
    dbl("eco_slope_max", spec.driving.eco_slope_max);
    dbl("normal_slope_min", spec.driving.normal_slope_min);
    dbl("normal_slope_max", spec.driving.normal_slope_max);
    dbl("eco_gyro_gain_min", spec.driving.eco_gyro_gain_min);
    dbl("eco_gyro_gain_max", spec.driving.eco_gyro_gain_max);
    dbl("normal_gyro_gain_min", spec.driving.normal_gyro_gain_min);
    dbl("normal_gyro_gain_max", spec.driving.normal_gyro_gain_max);
    spec.driving.normal_counter_steer = get_field<bool>(
        d, dpath, "normal_counter_steer", spec.driving.normal_counter_steer);
    dbl("eco_speed_noise", spec.driving.eco_speed_noise);
    dbl("normal_speed_noise", spec.driving.normal_speed_noise);
    dbl("steer_noise", spec.driving.steer_noise);
    dbl("eco_steer_amp_min", spec.driving.eco_steer_amp_min);
    dbl("eco_steer_amp_max", spec.driving.eco_steer_amp_max);
    dbl("normal_steer_amp_min", spec.driving.normal_steer_amp_min);
    dbl("normal_steer_amp_max", spec.driving.normal_steer_amp_max);
    dbl("rpm_stale_rate", spec.driving.rpm_stale_rate);
  }
  spec.window_len = get_field<std::size_t>(j, path, "window_len", 40);
  spec.horizon = get_field<std::size_t>(j, path, "horizon", 20);
  spec.stride = get_field<std::size_t>(j, path, "stride", 1);
  spec.train_fraction = get_field<double>(j, path, "train_fraction", 2.0 / 3.0);
  if (j.contains("groups")) {
    spec.group_override =
        get_field<std::vector<std::vector<std::size_t>>>(j, path, "groups", {});
  }
  return spec;
}

ArchitectureSpec parse_architecture(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "tower", "gate_pre_activation"});
  ArchitectureSpec spec;
  spec.kind = arch_kind_from_name(get_string(j, path, "kind", "two_stage"));
  if (j.contains("tower")) spec.tower = parse_tower(j.at("tower"), path + ".tower");
  spec.gate_pre_activation =
      get_field<bool>(j, path, "gate_pre_activation", false);
  return spec;
}

PerturbationSpec parse_perturbation(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "gamma", "seed", "scope", "features"});
  PerturbationSpec spec;
  const std::string kind = get_string(j, path, "kind", "none");
  if (kind == "none") {
    spec.kind = PerturbKind::None;
  } else if (kind == "gaussian_noise") {
    spec.kind = PerturbKind::GaussianNoise;
  } else if (kind == "sensor_failure") {
    spec.kind = PerturbKind::SensorFailure;
  } else {
    bad(path + ".kind", "unknown perturbation kind '" + kind + "'");
  }
  if (j.contains("gamma")) {
    const json& g = j.at("gamma");
    if (g.is_string()) {
      spec.gamma = parse_gamma(g.get<std::string>());
    } else if (g.is_number()) {
      spec.gamma = g.get<double>();
    } else {
      bad(path + ".gamma", "expected a number or percentage string");
    }
  }
  spec.seed = get_field<std::uint64_t>(j, path, "seed", 0);
  const std::string scope = get_string(j, path, "scope", "both");
  if (scope == "train") {
    spec.scope = PerturbScope::Train;
  } else if (scope == "test") {
    spec.scope = PerturbScope::Test;
  } else if (scope == "both") {
    spec.scope = PerturbScope::Both;
  } else {
    bad(path + ".scope", "unknown scope '" + scope + "'");
  }
  spec.features =
      get_field<std::vector<std::size_t>>(j, path, "features", {});
  spec.validate();
  return spec;
}

TrainingSpec parse_training(const json& j, const std::string& path) {
  check_keys(j, path, {"iterations", "batch_size", "optimizer",
                       "learning_rate", "seed", "loss_every", "eval_every"});
  TrainingSpec spec;
  spec.iterations = get_field<std::size_t>(j, path, "iterations", spec.iterations);
  spec.batch_size = get_field<std::size_t>(j, path, "batch_size", spec.batch_size);
  const std::string opt = get_string(j, path, "optimizer", "adam");
  if (opt == "adam") {
    spec.optimizer = OptimKind::Adam;
  } else if (opt == "sgd") {
    spec.optimizer = OptimKind::Sgd;
  } else {
    bad(path + ".optimizer", "unknown optimizer '" + opt + "'");
  }
  spec.learning_rate =
      get_field<double>(j, path, "learning_rate", spec.learning_rate);
  spec.seed = get_field<std::uint64_t>(j, path, "seed", spec.seed);
  spec.loss_every = get_field<std::size_t>(j, path, "loss_every", spec.loss_every);
  spec.eval_every = get_field<std::size_t>(j, path, "eval_every", spec.eval_every);
  return spec;
}

ExperimentConfig parse_experiment_json(const json& doc,
                                       const std::string& root) {
  check_keys(doc, root,
             {"dataset", "architecture", "perturbation", "training",
              "output_dir", "save_model"});
  ExperimentConfig cfg;
  if (doc.contains("dataset")) {
    cfg.dataset = parse_dataset(doc.at("dataset"),
                                root.empty() ? "dataset" : root + ".dataset");
  }
  if (doc.contains("architecture")) {
    cfg.architecture =
        parse_architecture(doc.at("architecture"),
                           root.empty() ? "architecture" : root + ".architecture");
  }
  if (doc.contains("perturbation")) {
    cfg.perturbation =
        parse_perturbation(doc.at("perturbation"),
                           root.empty() ? "perturbation" : root + ".perturbation");
  }
  if (doc.contains("training")) {
    cfg.training = parse_training(doc.at("training"),
                                  root.empty() ? "training" : root + ".training");
  }
  cfg.output_dir = get_string(doc, root, "output_dir", "");
  cfg.save_model = get_field<bool>(doc, root, "save_model", false);
  return cfg;
}

json layer_to_json(const LayerSpec& layer) {
  json j;
  switch (layer.kind) {
    case LayerSpec::Kind::Conv1D:
      j["kind"] = "conv1d";
      j["channels"] = layer.channels;
      j["kernel"] = layer.kernel;
      j["stride"] = layer.stride;
      break;
    case LayerSpec::Kind::MaxPool:
      j["kind"] = "maxpool";
      j["window"] = layer.window;
      j["stride"] = layer.stride;
      break;
    case LayerSpec::Kind::FullyConnected:
      j["kind"] = "fc";
      j["units"] = layer.units;
      break;
    case LayerSpec::Kind::ReLU:
      j["kind"] = "relu";
      break;
  }
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment_json(doc, "");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

std::string serialize_experiment_config(const ExperimentConfig& config) {
  json doc;
  json dataset;
  dataset["kind"] =
      config.dataset.kind == DatasetSpec::Kind::Driving ? "driving" : "csv";
  if (!config.dataset.csv_path.empty()) dataset["path"] = config.dataset.csv_path;
  dataset["har_labels"] = config.dataset.har_labels;
  dataset["decimate"] = config.dataset.decimate_factor;
  if (config.dataset.kind == DatasetSpec::Kind::Driving) {
    json d;
    d["length"] = config.dataset.driving.length;
    d["seed"] = config.dataset.driving.seed;
    d["sample_period"] = config.dataset.driving.sample_period;
    d["idle_ratio"] = config.dataset.driving.idle_ratio;
    d["eco_ratio"] = config.dataset.driving.eco_ratio;
    d["normal_ratio"] = config.dataset.driving.normal_ratio;
    d["dwell_min"] = config.dataset.driving.dwell_min;
    d["dwell_max"] = config.dataset.driving.dwell_max;
    const auto& drv = config.dataset.driving;
    d["speed_min"] = drv.speed_min;
    d["speed_max"] = drv.speed_max;
    d["eco_slope_min"] = drv.eco_slope_min;
    d["eco_slope_max"] = drv.eco_slope_max;
    d["normal_slope_min"] = drv.normal_slope_min;
    d["normal_slope_max"] = drv.normal_slope_max;
    d["eco_gyro_gain_min"] = drv.eco_gyro_gain_min;
    d["eco_gyro_gain_max"] = drv.eco_gyro_gain_max;
    d["normal_gyro_gain_min"] = drv.normal_gyro_gain_min;
    d["normal_gyro_gain_max"] = drv.normal_gyro_gain_max;
    d["normal_counter_steer"] = drv.normal_counter_steer;
    d["eco_speed_noise"] = drv.eco_speed_noise;
    d["normal_speed_noise"] = drv.normal_speed_noise;
    d["steer_noise"] = drv.steer_noise;
    d["eco_steer_amp_min"] = drv.eco_steer_amp_min;
    d["eco_steer_amp_max"] = drv.eco_steer_amp_max;
    d["normal_steer_amp_min"] = drv.normal_steer_amp_min;
    d["normal_steer_amp_max"] = drv.normal_steer_amp_max;
    d["rpm_stale_rate"] = drv.rpm_stale_rate;
    dataset["driving"] = std::move(d);
  }
  dataset["window_len"] = config.dataset.window_len;
  dataset["horizon"] = config.dataset.horizon;
  dataset["stride"] = config.dataset.stride;
  dataset["train_fraction"] = config.dataset.train_fraction;
  if (!config.dataset.group_override.empty()) {
    dataset["groups"] = config.dataset.group_override;
  }
  doc["dataset"] = std::move(dataset);

  json arch;
  arch["kind"] = arch_kind_name(config.architecture.kind);
  json tower = json::array();
  for (const LayerSpec& layer : config.architecture.tower) {
    tower.push_back(layer_to_json(layer));
  }
  arch["tower"] = std::move(tower);
  arch["gate_pre_activation"] = config.architecture.gate_pre_activation;
  doc["architecture"] = std::move(arch);

  json perturb;
  switch (config.perturbation.kind) {
    case PerturbKind::None: perturb["kind"] = "none"; break;
    case PerturbKind::GaussianNoise: perturb["kind"] = "gaussian_noise"; break;
    case PerturbKind::SensorFailure: perturb["kind"] = "sensor_failure"; break;
  }
  perturb["gamma"] = config.perturbation.gamma;
  perturb["seed"] = config.perturbation.seed;
  perturb["scope"] = config.perturbation.scope == PerturbScope::Train
                         ? "train"
                         : config.perturbation.scope == PerturbScope::Test
                               ? "test"
                               : "both";
  if (!config.perturbation.features.empty()) {
    perturb["features"] = config.perturbation.features;
  }
  doc["perturbation"] = std::move(perturb);

  json training;
  training["iterations"] = config.training.iterations;
  training["batch_size"] = config.training.batch_size;
  training["optimizer"] =
      config.training.optimizer == OptimKind::Adam ? "adam" : "sgd";
  training["learning_rate"] = config.training.learning_rate;
  training["seed"] = config.training.seed;
  training["loss_every"] = config.training.loss_every;
  training["eval_every"] = config.training.eval_every;
  doc["training"] = std::move(training);

  doc["output_dir"] = config.output_dir;
  doc["save_model"] = config.save_model;
  return doc.dump(2);
}

CompareConfig parse_compare_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "", {"base", "architectures", "perturbations", "output_dir"});
  CompareConfig cfg;
  if (!doc.contains("base")) bad("base", "required section missing");
  cfg.base = parse_experiment_json(doc.at("base"), "base");
  if (!cfg.base.output_dir.empty()) {
    bad("base.output_dir", "set the grid-level output_dir instead");
  }
  if (!doc.contains("architectures") || !doc.at("architectures").is_array() ||
      doc.at("architectures").empty()) {
    bad("architectures", "expected a nonempty array of architecture names");
  }
  for (const auto& a : doc.at("architectures")) {
    cfg.architectures.push_back(arch_kind_from_name(a.get<std::string>()));
  }
  if (doc.contains("perturbations")) {
    const json& ps = doc.at("perturbations");
    if (!ps.is_array()) bad("perturbations", "expected an array");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      cfg.perturbations.push_back(parse_perturbation(
          ps[i], "perturbations[" + std::to_string(i) + "]"));
    }
  }
  if (cfg.perturbations.empty()) {
    cfg.perturbations.push_back(PerturbationSpec{});  // clean only
  }
  cfg.output_dir = get_string(doc, "", "output_dir", "");
  return cfg;
}

CompareConfig load_compare_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_compare_config(text);
}

}  // namespace fusegate
