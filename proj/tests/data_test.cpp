#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fusegate/data.hpp"
#include "fusegate/errors.hpp"

using namespace fusegate;

namespace {

SensorStream ramp_stream(std::size_t total, std::size_t n_features = 2) {
  SensorStream s;
  for (std::size_t f = 0; f < n_features; ++f) {
    s.feature_names.push_back("F" + std::to_string(f));
  }
  s.sample_period = 0.25;
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t f = 0; f < n_features; ++f) {
      s.samples.push_back(static_cast<double>(t) + 100.0 * static_cast<double>(f));
    }
    s.labels.push_back(static_cast<int>(t % 3));
  }
  return s;
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("window arithmetic matches the paper setup") {
  // 250 ms sampling: a 10 s window is 40 points, a 5 s horizon is 20.
  CHECK(static_cast<std::size_t>(10.0 / 0.25) == 40);
  CHECK(static_cast<std::size_t>(5.0 / 0.25) == 20);

  SensorStream s = ramp_stream(100);
  WindowedDataset ds = make_windows(s, 40, 20, 1);
  CHECK(ds.count() == (100 - 40 - 20) / 1 + 1);
  CHECK(ds.n_features == 2);
  CHECK(ds.window_len == 40);
  // First window covers t in [0,39]; label is the stream label at t=59.
  CHECK(ds.labels[0] == static_cast<int>(59 % 3));
  CHECK(ds.window_ptr(0)[0] == 0.0);
  CHECK(ds.window_ptr(0)[39] == 39.0);
  CHECK(ds.window_ptr(0)[40] == 100.0);  // second feature row
}

TEST_CASE("boundary: stream of 45 with window 40 horizon 5 gives one window") {
  SensorStream s = ramp_stream(45);
  WindowedDataset ds = make_windows(s, 40, 5, 1);
  CHECK(ds.count() == 1);
  CHECK(ds.labels[0] == static_cast<int>(44 % 3));

  SensorStream tooShort = ramp_stream(44);
  CHECK_THROWS_AS(make_windows(tooShort, 40, 5, 1), DataError);
}

TEST_CASE("shifting the stream shifts window labels in lockstep") {
  SensorStream s = ramp_stream(80);
  WindowedDataset base = make_windows(s, 10, 4, 1);

  const std::size_t shift = 7;
  SensorStream shifted;
  shifted.feature_names = s.feature_names;
  shifted.sample_period = s.sample_period;
  shifted.samples.assign(s.samples.begin() + static_cast<std::ptrdiff_t>(
                                                 shift * s.n_features()),
                         s.samples.end());
  shifted.labels.assign(s.labels.begin() + static_cast<std::ptrdiff_t>(shift),
                        s.labels.end());
  WindowedDataset moved = make_windows(shifted, 10, 4, 1);
  for (std::size_t i = 0; i < moved.count(); ++i) {
    CHECK(moved.labels[i] == base.labels[i + shift]);
  }
}

TEST_CASE("feature-wise normalization") {
  NormStats stats;
  stats.mean = {10.0, 0.0};
  stats.stddev = {2.0, 1.0};
  stats.centered_only = {false, false};

  SensorStream s = ramp_stream(30);
  for (std::size_t t = 0; t < 30; ++t) s.at(t, 0) = 14.0;  // constant 14
  WindowedDataset ds = make_windows(s, 5, 0, 1);
  WindowedDataset norm = normalize_featurewise(ds, stats);
  // (14 - 10) / 2 = 2
  CHECK(norm.window_ptr(0)[0] == doctest::Approx(2.0).epsilon(1e-15));

  // Round trip through the algebraic inverse.
  for (std::size_t i = 0; i < 5; ++i) {
    const double back = denormalize_value(stats, 0, norm.window_ptr(0)[i]);
    CHECK(back == doctest::Approx(ds.window_ptr(0)[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero-variance feature is centered only") {
  SensorStream s = ramp_stream(50);
  for (std::size_t t = 0; t < 50; ++t) s.at(t, 1) = 3.5;
  NormStats stats = compute_feature_stats(s);
  CHECK(stats.centered_only[1]);
  CHECK_FALSE(stats.centered_only[0]);
  CHECK(stats.mean[1] == doctest::Approx(3.5).epsilon(1e-15));

  WindowedDataset ds = make_windows(s, 5, 0, 1);
  WindowedDataset norm = normalize_featurewise(ds, stats);
  // Constant feature becomes all zeros.
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(norm.window_ptr(0)[5 + t] == 0.0);
  }
}

TEST_CASE("training stats are independent of the test split") {
  SensorStream s = ramp_stream(90);
  auto [train, test] = split_stream(s, 2.0 / 3.0);
  CHECK(train.length() == 60);
  CHECK(test.length() == 30);
  NormStats from_train = compute_feature_stats(train);
  // Oracle: recompute from the train half alone, by construction 0..59.
  double mean = 0;
  for (int t = 0; t < 60; ++t) mean += t;
  mean /= 60.0;
  CHECK(from_train.mean[0] == doctest::Approx(mean).epsilon(1e-12));
  // Windows of each split stay inside their stream.
  WindowedDataset train_ds = make_windows(train, 10, 2, 1);
  for (std::size_t i = 0; i < train_ds.count(); ++i) {
    for (std::size_t t = 0; t < 10; ++t) {
      CHECK(train_ds.window_ptr(i)[t] < 60.0);
    }
  }
}

TEST_CASE("synthetic driving: idle speed, d_speed construction, determinism") {
  SyntheticDrivingConfig cfg;
  cfg.length = 6000;
  cfg.seed = 42;
  SensorStream s = generate_driving(cfg);
  REQUIRE(s.length() == 6000);
  REQUIRE(s.n_features() == 5);
  CHECK(s.feature_names == kDrivingFeatureNames);

  std::size_t idle_count = 0;
  for (std::size_t t = 0; t < s.length(); ++t) {
    if (s.labels[t] == 0) {
      ++idle_count;
      CHECK(s.at(t, 1) == 0.0);  // idle => SPEED identically zero
    }
    if (t > 0) {
      CHECK(s.at(t, 2) == s.at(t, 1) - s.at(t - 1, 1));  // exact difference
    }
  }
  CHECK(s.at(0, 2) == 0.0);
  CHECK(idle_count > 0);

  SensorStream again = generate_driving(cfg);
  CHECK(again.samples == s.samples);
  CHECK(again.labels == s.labels);

  SyntheticDrivingConfig other = cfg;
  other.seed = 43;
  CHECK(generate_driving(other).samples != s.samples);
}

TEST_CASE("driving label distribution tracks configured ratios") {
  SyntheticDrivingConfig cfg;
  cfg.length = 400000;  // >= 1e5 steps; extra length tightens the estimate
  cfg.seed = 7;
  cfg.idle_ratio = 0.25;
  cfg.eco_ratio = 0.40;
  cfg.normal_ratio = 0.35;
  SensorStream s = generate_driving(cfg);
  double counts[3] = {0, 0, 0};
  for (int l : s.labels) counts[l] += 1.0;
  const double total = static_cast<double>(s.length());
  CHECK(std::fabs(counts[0] / total - 0.25) < 0.05 * 0.25 + 0.01);
  CHECK(std::fabs(counts[1] / total - 0.40) < 0.05 * 0.40 + 0.01);
  CHECK(std::fabs(counts[2] / total - 0.35) < 0.05 * 0.35 + 0.01);
}

TEST_CASE("csv round trip and format validation") {
  SyntheticDrivingConfig cfg;
  cfg.length = 200;
  cfg.seed = 3;
  SensorStream s = generate_driving(cfg);
  const std::string path = temp_file("fusegate_stream.csv");
  write_stream_csv(s, path);
  SensorStream back = load_stream_csv(path);
  REQUIRE(back.length() == s.length());
  REQUIRE(back.n_features() == 5);
  CHECK(back.sample_period == doctest::Approx(0.25).epsilon(1e-12));
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(back.samples[i] == s.samples[i]);  // %.17g is lossless
  }
  CHECK(back.labels == s.labels);
  std::filesystem::remove(path);
}

TEST_CASE("csv loader reports malformed rows with line numbers") {
  const std::string path = temp_file("fusegate_bad.csv");
  {
    std::ofstream out(path);
    out << "t,A,B,label\n";
    out << "0.0,1.0,2.0,0\n";
    out << "0.25,3.0,1\n";  // five fields expected, got three
  }
  bool threw = false;
  try {
    load_stream_csv(path);
  } catch (const DataError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(threw);

  {
    std::ofstream out(path);
    out << "t,A,B,label\n";
    out << "0.0,1.0,oops,0\n";
  }
  CHECK_THROWS_AS(load_stream_csv(path), DataError);

  {
    std::ofstream out(path);
    out << "A,B,label\n";  // missing t column
    out << "1.0,2.0,0\n";
  }
  CHECK_THROWS_AS(load_stream_csv(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("har loader: six features, named labels, unknown label errors") {
  const std::string path = temp_file("fusegate_har.csv");
  {
    std::ofstream out(path);
    out << "t,ACC_X,ACC_Y,ACC_Z,GYRO_X,GYRO_Y,GYRO_Z,label\n";
    out << "0.0,0.1,0.2,0.3,0.4,0.5,0.6,WALKING\n";
    out << "0.2,0.2,0.3,0.4,0.5,0.6,0.7,LAYING\n";
    out << "0.4,0.3,0.4,0.5,0.6,0.7,0.8,3\n";
  }
  SensorStream s = load_har(path);
  REQUIRE(s.length() == 3);
  CHECK(s.labels[0] == 0);
  CHECK(s.labels[1] == 5);
  CHECK(s.labels[2] == 3);

  {
    std::ofstream out(path);
    out << "t,ACC_X,ACC_Y,ACC_Z,GYRO_X,GYRO_Y,GYRO_Z,label\n";
    out << "0.0,0.1,0.2,0.3,0.4,0.5,0.6,JOGGING\n";
  }
  bool threw = false;
  try {
    load_har(path);
  } catch (const LabelError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("JOGGING") != std::string::npos);
  }
  CHECK(threw);

  {
    std::ofstream out(path);
    out << "t,A,B,label\n";
    out << "0.0,1.0,2.0,0\n";
  }
  CHECK_THROWS_AS(load_har(path), DataError);  // not six features
  std::filesystem::remove(path);
}

TEST_CASE("decimation keeps every k-th sample") {
  SensorStream s = ramp_stream(25);
  SensorStream d = decimate(s, 10);
  CHECK(d.length() == 2);  // floor(25/10)
  // Last sample of each block: indices 9 and 19.
  CHECK(d.samples[0] == 9.0);
  CHECK(d.at(1, 0) == 19.0);
  CHECK(d.sample_period == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(decimate(s, 1).samples == s.samples);
  CHECK_THROWS_AS(decimate(s, 0), ConfigError);
}

TEST_CASE("default groups match the paper assignments") {
  GroupSpec driving = default_groups(DatasetKind::Driving);
  REQUIRE(driving.count() == 2);
  CHECK(driving.groups[0] == std::vector<std::size_t>{0, 1, 2});
  CHECK(driving.groups[1] == std::vector<std::size_t>{3, 4});
  driving.validate(5);

  GroupSpec har = default_groups(DatasetKind::Har);
  REQUIRE(har.count() == 2);
  CHECK(har.groups[0].size() == 2);
  CHECK(har.groups[1].size() == 4);
  har.validate(6);
}
