#include "fusegate/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "fusegate/errors.hpp"
#include "fusegate/ops.hpp"
#include "fusegate/report.hpp"
#include "fusegate/rng.hpp"

namespace fusegate {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string describe_dataset(const DatasetSpec& d) {
  std::ostringstream os;
  if (d.kind == DatasetSpec::Kind::Driving) {
    const auto& g = d.driving;
    os << "driving(length=" << g.length << ",seed=" << g.seed
       << ",period=" << g.sample_period << ",ratios=" << g.idle_ratio << '/'
       << g.eco_ratio << '/' << g.normal_ratio << ",dwell=" << g.dwell_min
       << '-' << g.dwell_max << ')';
  } else {
    os << "csv(path=" << d.csv_path << ",har=" << d.har_labels << ')';
  }
  os << ";decimate=" << d.decimate_factor << ";window=" << d.window_len
     << ";horizon=" << d.horizon << ";stride=" << d.stride
     << ";train_fraction=" << d.train_fraction << ";groups=";
  for (std::size_t g = 0; g < d.group_override.size(); ++g) {
    if (g) os << '/';
    for (std::size_t i = 0; i < d.group_override[g].size(); ++i) {
      if (i) os << ',';
      os << d.group_override[g][i];
    }
  }
  return os.str();
}

std::string describe_perturbation(const PerturbationSpec& p) {
  std::ostringstream os;
  os << p.describe() << ";seed=" << p.seed << ";scope="
     << (p.scope == PerturbScope::Train
             ? "train"
             : p.scope == PerturbScope::Test ? "test" : "both");
  return os.str();
}

std::string describe_training(const TrainingSpec& t) {
  std::ostringstream os;
  os << "iterations=" << t.iterations << ";batch=" << t.batch_size
     << ";optimizer=" << (t.optimizer == OptimKind::Adam ? "adam" : "sgd")
     << ";lr=" << t.learning_rate << ";seed=" << t.seed
     << ";loss_every=" << t.loss_every << ";eval_every=" << t.eval_every;
  return os.str();
}

std::string describe_architecture(const ArchitectureSpec& a) {
  std::ostringstream os;
  os << arch_kind_name(a.kind) << ";tower=";
  for (std::size_t i = 0; i < a.tower.size(); ++i) {
    if (i) os << '|';
    os << a.tower[i].describe();
  }
  os << ";preact=" << a.gate_pre_activation;
  return os.str();
}

}  // namespace

std::string ExperimentConfig::fingerprint() const {
  std::ostringstream os;
  os << "dataset{" << describe_dataset(dataset) << "}arch{"
     << describe_architecture(architecture) << "}perturb{"
     << describe_perturbation(perturbation) << "}training{"
     << describe_training(training) << '}';
  std::uint64_t h = fnv1a(os.str());
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

DatasetBundle build_dataset(const DatasetSpec& spec,
                            const PerturbationSpec& perturbation) {
  SensorStream stream;
  DatasetKind kind_for_groups = DatasetKind::Driving;
  if (spec.kind == DatasetSpec::Kind::Driving) {
    stream = generate_driving(spec.driving);
  } else {
    stream = spec.har_labels ? load_har(spec.csv_path)
                             : load_stream_csv(spec.csv_path);
    if (spec.har_labels) kind_for_groups = DatasetKind::Har;
  }
  if (spec.decimate_factor > 1) stream = decimate(stream, spec.decimate_factor);

  auto [train_stream, test_stream] = split_stream(stream, spec.train_fraction);

  // Corruption precedes windowing and the normalization statistics, so the
  // training pipeline sees the corrupted distribution end to end.
  train_stream = apply_perturbation(train_stream, perturbation, true);
  test_stream = apply_perturbation(test_stream, perturbation, false);

  DatasetBundle bundle;
  bundle.n_features = stream.n_features();
  NormStats stats = compute_feature_stats(train_stream);
  bundle.train = normalize_featurewise(
      make_windows(train_stream, spec.window_len, spec.horizon, spec.stride),
      stats);
  bundle.test = normalize_featurewise(
      make_windows(test_stream, spec.window_len, spec.horizon, spec.stride),
      stats);

  if (!spec.group_override.empty()) {
    bundle.groups.groups = spec.group_override;
  } else if (spec.kind == DatasetSpec::Kind::Driving) {
    bundle.groups = default_groups(DatasetKind::Driving);
  } else if (spec.har_labels) {
    bundle.groups = default_groups(kind_for_groups);
  } else {
    // Generic CSV without a declared grouping: one group per feature.
    for (std::size_t f = 0; f < bundle.n_features; ++f) {
      bundle.groups.groups.push_back({f});
    }
  }
  bundle.groups.validate(bundle.n_features);

  int classes = 0;
  for (int l : stream.labels) classes = std::max(classes, l + 1);
  bundle.n_classes = static_cast<std::size_t>(classes);
  if (bundle.n_classes < 2) {
    throw DataError("dataset has fewer than 2 classes");
  }
  return bundle;
}

std::pair<double, FusionReport> evaluate(const FusionModel& model,
                                         const WindowedDataset& test) {
  if (test.count() == 0) throw DataError("evaluate: empty test split");
  std::size_t correct = 0;
  FusionReport mean;
  for (std::size_t i = 0; i < test.count(); ++i) {
    ForwardOutput out = model.forward(test.window_tensor(i), nullptr);
    auto logits = out.logits.data();
    const std::size_t pred = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (static_cast<int>(pred) == test.labels[i]) ++correct;

    auto accumulate = [](std::vector<double>& acc,
                         const std::vector<double>& v) {
      if (v.empty()) return;
      if (acc.empty()) acc.assign(v.size(), 0.0);
      for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
    };
    accumulate(mean.feature_weights, out.report.feature_weights);
    accumulate(mean.group_weights, out.report.group_weights);
    accumulate(mean.final_weights, out.report.final_weights);
  }
  const double inv = 1.0 / static_cast<double>(test.count());
  for (auto* vec : {&mean.feature_weights, &mean.group_weights,
                    &mean.final_weights}) {
    for (double& v : *vec) v *= inv;
  }
  return {static_cast<double>(correct) / static_cast<double>(test.count()),
          mean};
}

RunResult train(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.training.iterations == 0) {
    throw ConfigError("training: iterations must be at least 1");
  }
  if (config.training.batch_size == 0) {
    throw ConfigError("training: batch_size must be at least 1");
  }
  config.perturbation.validate();

  DatasetBundle data = build_dataset(config.dataset, config.perturbation);

  ModelConfig mcfg;
  mcfg.kind = config.architecture.kind;
  mcfg.n_features = data.n_features;
  mcfg.window_len = config.dataset.window_len;
  mcfg.n_classes = data.n_classes;
  mcfg.tower = config.architecture.tower;
  mcfg.groups = data.groups;
  mcfg.gate_pre_activation = config.architecture.gate_pre_activation;
  mcfg.init_seed = Rng::derive(config.training.seed, 0xa11);
  FusionModel model = FusionModel::build(mcfg);

  OptimizerConfig ocfg;
  ocfg.kind = config.training.optimizer;
  ocfg.learning_rate = config.training.learning_rate;
  Optimizer optimizer(ocfg, model.parameters());

  Rng batch_rng(Rng::derive(config.training.seed, 0xb47c4));

  RunResult result;
  result.architecture = arch_kind_name(config.architecture.kind);
  result.perturbation_label = config.perturbation.describe();
  result.seed = config.training.seed;
  result.fingerprint = config.fingerprint();
  result.n_train = data.train.count();
  result.n_test = data.test.count();

  const std::size_t loss_every =
      config.training.loss_every == 0 ? 1 : config.training.loss_every;
  Tape tape;
  std::vector<Tensor> losses;
  losses.reserve(config.training.batch_size);
  for (std::size_t iter = 1; iter <= config.training.iterations; ++iter) {
    losses.clear();
    for (std::size_t b = 0; b < config.training.batch_size; ++b) {
      const std::size_t pick =
          static_cast<std::size_t>(batch_rng.uniform_index(data.train.count()));
      ForwardOutput out = model.forward(data.train.window_tensor(pick), &tape);
      losses.push_back(cross_entropy_loss(
          out.logits, static_cast<std::size_t>(data.train.labels[pick]),
          &tape));
    }
    Tensor loss = scale(add_n(losses, &tape),
                        1.0 / static_cast<double>(losses.size()), &tape);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw ContractError("training diverged: loss is not finite at iteration " +
                          std::to_string(iter));
    }
    tape.backward(loss);
    optimizer.step();

    if (iter % loss_every == 0 || iter == config.training.iterations) {
      result.loss_trace.emplace_back(iter, loss_value);
    }
    if (config.training.eval_every > 0 &&
        (iter % config.training.eval_every == 0 ||
         iter == config.training.iterations)) {
      result.accuracy_trace.emplace_back(iter,
                                         evaluate(model, data.test).first);
    }
  }

  auto [accuracy, mean_report] = evaluate(model, data.test);
  result.accuracy = accuracy;
  result.mean_report = std::move(mean_report);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  if (!config.output_dir.empty()) {
    emit_reports(result, config, config.output_dir);
    if (config.save_model) {
      model.save(config.output_dir + "/model.json");
    }
  }
  return result;
}

ComparisonTable compare(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw ConfigError("compare: no configs supplied");
  const std::string dataset_ref = describe_dataset(configs.front().dataset);
  const std::string perturb_ref =
      describe_perturbation(configs.front().perturbation);
  const std::string training_ref = describe_training(configs.front().training);
  for (const ExperimentConfig& cfg : configs) {
    if (describe_dataset(cfg.dataset) != dataset_ref) {
      throw ConfigError("compare: configs mix different dataset specs");
    }
    if (describe_perturbation(cfg.perturbation) != perturb_ref) {
      throw ConfigError("compare: configs mix different perturbation specs");
    }
    if (describe_training(cfg.training) != training_ref) {
      throw ConfigError("compare: configs mix different training specs");
    }
  }

  ComparisonTable table;
  table.perturbation_labels.push_back(
      configs.front().perturbation.describe());
  for (const ExperimentConfig& cfg : configs) {
    RunResult r = train(cfg);
    ComparisonRow row;
    row.architecture = r.architecture;
    row.seed = r.seed;
    row.fingerprint = r.fingerprint;
    row.accuracy_by_perturbation.emplace_back(r.perturbation_label,
                                              r.accuracy);
    table.rows.push_back(std::move(row));
  }
  return table;
}

ComparisonTable merge_tables(const std::vector<ComparisonTable>& tables) {
  if (tables.empty()) throw ConfigError("merge_tables: nothing to merge");
  ComparisonTable out;
  for (const ComparisonTable& t : tables) {
    out.perturbation_labels.insert(out.perturbation_labels.end(),
                                   t.perturbation_labels.begin(),
                                   t.perturbation_labels.end());
  }
  out.rows = tables.front().rows;
  for (std::size_t i = 1; i < tables.size(); ++i) {
    if (tables[i].rows.size() != out.rows.size()) {
      throw ConfigError("merge_tables: tables have mismatched row counts");
    }
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
      if (tables[i].rows[r].architecture != out.rows[r].architecture) {
        throw ConfigError("merge_tables: row architectures disagree");
      }
      out.rows[r].accuracy_by_perturbation.insert(
          out.rows[r].accuracy_by_perturbation.end(),
          tables[i].rows[r].accuracy_by_perturbation.begin(),
          tables[i].rows[r].accuracy_by_perturbation.end());
    }
  }
  return out;
}

std::string format_weight_table(const RunResult& result,
                                const RunResult* baseline) {
  const FusionReport& rpt = result.mean_report;
  if (rpt.feature_weights.empty() && rpt.group_weights.empty()) {
    throw UnsupportedError("run '" + result.architecture +
                           "' emits no fusion weights to inspect");
  }
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  auto row = [&](const char* name, const std::vector<double>& v) {
    if (v.empty()) return;
    os << name;
    for (double w : v) os << '\t' << w;
    os << '\n';
  };
  os << "architecture: " << result.architecture << " ("
     << result.perturbation_label << ")\n";
  row("feature_weights", rpt.feature_weights);
  row("group_weights", rpt.group_weights);
  row("final_weights", rpt.final_weights);
  if (baseline) {
    const FusionReport& base = baseline->mean_report;
    auto delta_row = [&](const char* name, const std::vector<double>& now,
                         const std::vector<double>& was) {
      if (now.empty() || was.size() != now.size()) return;
      os << name;
      for (std::size_t i = 0; i < now.size(); ++i) {
        os << '\t' << (now[i] - was[i]);
      }
      os << '\n';
    };
    os << "deltas vs baseline (" << baseline->perturbation_label << ")\n";
    delta_row("d_feature_weights", rpt.feature_weights, base.feature_weights);
    delta_row("d_group_weights", rpt.group_weights, base.group_weights);
    delta_row("d_final_weights", rpt.final_weights, base.final_weights);
  }
  return os.str();
}

}  // namespace fusegate
