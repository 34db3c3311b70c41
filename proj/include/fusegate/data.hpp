#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fusegate/fusion.hpp"
#include "fusegate/tensor.hpp"

namespace fusegate {

// A labeled multi-feature time series: samples are row-major [T x N].
struct SensorStream {
  std::vector<std::string> feature_names;
  std::vector<double> samples;
  std::vector<int> labels;  // class index per timestamp
  double sample_period = 1.0;

  std::size_t n_features() const { return feature_names.size(); }
  std::size_t length() const {
    return feature_names.empty() ? 0 : samples.size() / feature_names.size();
  }
  double at(std::size_t t, std::size_t f) const {
    return samples[t * n_features() + f];
  }
  double& at(std::size_t t, std::size_t f) {
    return samples[t * n_features() + f];
  }
};

// Per-feature normalization statistics, always computed from the training
// split. centered_only marks zero-variance features that were shifted but
// not scaled.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> centered_only;

  bool empty() const { return mean.empty(); }
};

// Fixed-length windows of shape [N x window_len] with one label each
// (the stream label `horizon` samples past the window end).
struct WindowedDataset {
  std::size_t n_features = 0;
  std::size_t window_len = 0;
  std::vector<double> windows;  // count * N * window_len, row-major per window
  std::vector<int> labels;
  NormStats stats;  // stats applied to this dataset; empty if raw

  std::size_t count() const { return labels.size(); }
  std::size_t window_size() const { return n_features * window_len; }
  const double* window_ptr(std::size_t i) const {
    return windows.data() + i * window_size();
  }
  Tensor window_tensor(std::size_t i) const;
  int n_classes() const;
};

// Slides a length-`window_len` window over the stream with the given stride;
// the label of the window ending at t is the stream label at t + horizon.
WindowedDataset make_windows(const SensorStream& stream,
                             std::size_t window_len, std::size_t horizon,
                             std::size_t stride);

// Population mean/std per feature over all stream samples.
NormStats compute_feature_stats(const SensorStream& stream);

// x' = (x - mean_f) / std_f. Zero-variance features are centered only and
// flagged (a warning is printed once per feature).
WindowedDataset normalize_featurewise(const WindowedDataset& ds,
                                      const NormStats& stats);

// Inverse transform for a single value of feature f under stats.
double denormalize_value(const NormStats& stats, std::size_t feature,
                         double value);

// Contiguous temporal split: the first floor(train_fraction * T) samples
// become the train stream, the remainder the test stream. Windows never
// cross the boundary.
std::pair<SensorStream, SensorStream> split_stream(const SensorStream& stream,
                                                   double train_fraction);

// Synthetic driving-mode generator: five features (RPM, SPEED, D_SPEED,
// GYRO_Y, D_HEADING) over three modes (idle=0, eco=1, normal=2). Segment
// modes are drawn i.i.d. from mode_ratios with uniform dwell, so long-run
// label frequencies converge to the configured ratios.
struct SyntheticDrivingConfig {
  std::size_t length = 20000;        // samples
  std::uint64_t seed = 1;
  double sample_period = 0.25;       // seconds
  double idle_ratio = 0.25;
  double eco_ratio = 0.40;
  double normal_ratio = 0.35;
  std::size_t dwell_min = 60;        // samples per mode segment
  std::size_t dwell_max = 200;

  // Per-mode dynamics. Speed targets share one range; the mode signal is
  // carried by the gear slope (RPM per unit speed), the speed-scaled gyro
  // gain (negative = counter-steer), and per-mode noise scales.
  double speed_min = 34.0;
  double speed_max = 62.0;
  double eco_slope_min = 19.0, eco_slope_max = 23.0;
  double normal_slope_min = 24.5, normal_slope_max = 28.5;
  double eco_gyro_gain_min = 0.0040, eco_gyro_gain_max = 0.0075;
  double normal_gyro_gain_min = 0.0070, normal_gyro_gain_max = 0.0120;
  bool normal_counter_steer = true;  // flips the gyro sign in normal mode
  double eco_speed_noise = 0.18, normal_speed_noise = 0.20;
  double steer_noise = 0.06;
  double eco_steer_amp_min = 0.20, eco_steer_amp_max = 0.42;
  double normal_steer_amp_min = 0.16, normal_steer_amp_max = 0.38;
  // Per-sample probability that the RPM readout freezes at a stale level
  // for a stretch (0 disables the episodes).
  double rpm_stale_rate = 0.006;

  void validate() const;
};

SensorStream generate_driving(const SyntheticDrivingConfig& config);

// CSV ingestion, format: header "t,<f1>,...,<fN>,label", one row per
// timestamp, '.' decimal separator. The sample period is inferred from the
// first two timestamps.
SensorStream load_stream_csv(const std::string& path);

// HAR wrapper: requires exactly six feature columns; labels may be integers
// 0..5 or the canonical activity names.
SensorStream load_har(const std::string& path);

// Writes a stream in the ingestion CSV format (lossless round-trip).
void write_stream_csv(const SensorStream& stream, const std::string& path);

// Keeps the last sample of every block of `factor` samples, so the result
// has floor(T / factor) samples.
SensorStream decimate(const SensorStream& stream, std::size_t factor);

enum class DatasetKind { Driving, Har };

// Paper groupings: driving -> {RPM,SPEED,D_SPEED},{GYRO_Y,D_HEADING};
// HAR -> {ACC_X,ACC_Y},{ACC_Z,GYRO_X,GYRO_Y,GYRO_Z}.
GroupSpec default_groups(DatasetKind kind);

extern const std::vector<std::string> kDrivingFeatureNames;
extern const std::vector<std::string> kHarFeatureNames;
extern const std::vector<std::string> kHarClassNames;

}  // namespace fusegate
