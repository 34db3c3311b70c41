#include <cmath>

#include "doctest.h"
#include "fusegate/errors.hpp"
#include "fusegate/layers.hpp"

using namespace fusegate;

TEST_CASE("build_tower shape chain: conv/pool/fc on 1x40") {
  // 40 -> conv k3 -> 38 -> pool(2,2) -> 19 -> FC(16)
  std::vector<LayerSpec> spec = {LayerSpec::conv1d(4, 3), LayerSpec::maxpool(2, 2),
                                 LayerSpec::fully_connected(16),
                                 LayerSpec::relu()};
  Rng rng(1);
  ParamRegistry reg;
  FeatureTower tower = FeatureTower::build(spec, 1, 40, rng, "t", reg);
  CHECK(tower.output_width() == 16);
  CHECK(tower.tap_width() == 4 * 19);

  Tensor x = Tensor::zeros({1, 40});
  TowerOutput out = tower.forward(x, nullptr);
  CHECK(out.output.shape() == Shape{16});
  CHECK(out.conv_tap.shape() == Shape{76});
}

TEST_CASE("empty spec gives the identity tower") {
  Rng rng(1);
  ParamRegistry reg;
  FeatureTower tower = FeatureTower::build({}, 2, 5, rng, "t", reg);
  CHECK(tower.output_width() == 10);
  CHECK(reg.all().empty());

  Tensor x = Tensor::from_data({2, 5}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  TowerOutput out = tower.forward(x, nullptr);
  REQUIRE(out.output.shape() == Shape{10});
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(out.output.data()[i] == static_cast<double>(i + 1));
  }
}

TEST_CASE("fc after fc narrows width") {
  std::vector<LayerSpec> spec = {LayerSpec::fully_connected(16),
                                 LayerSpec::fully_connected(8)};
  Rng rng(1);
  ParamRegistry reg;
  FeatureTower tower = FeatureTower::build(spec, 1, 16, rng, "t", reg);
  CHECK(tower.output_width() == 8);
}

TEST_CASE("invalid chain cites the first failing layer") {
  // conv after fc is invalid
  std::vector<LayerSpec> spec = {LayerSpec::fully_connected(8),
                                 LayerSpec::conv1d(2, 3)};
  Rng rng(1);
  ParamRegistry reg;
  bool threw = false;
  try {
    FeatureTower::build(spec, 1, 16, rng, "t", reg);
  } catch (const ConfigError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  CHECK(threw);

  // pool window larger than remaining length
  std::vector<LayerSpec> spec2 = {LayerSpec::conv1d(2, 6),
                                  LayerSpec::maxpool(4, 4)};
  CHECK_THROWS_AS(FeatureTower::build(spec2, 1, 8, rng, "t2", reg),
                  ConfigError);
}

TEST_CASE("zero-initialized fc-only tower returns its bias") {
  std::vector<LayerSpec> spec = {LayerSpec::fully_connected(3)};
  Rng rng(1);
  ParamRegistry reg;
  FeatureTower tower = FeatureTower::build(spec, 1, 4, rng, "t", reg);
  // Zero the weight; bias starts at zero, give it known values.
  for (const NamedParam& p : reg.all()) {
    auto v = const_cast<Tensor&>(p.tensor).data_mut();
    for (double& x : v) x = 0.0;
  }
  auto bias = const_cast<Tensor*>(reg.find("t.layer0.bias"))->data_mut();
  bias[0] = 1.0;
  bias[1] = -2.0;
  bias[2] = 0.5;

  Tensor x = Tensor::from_data({1, 4}, {9, 9, 9, 9});
  TowerOutput out = tower.forward(x, nullptr);
  CHECK(out.output.data()[0] == 1.0);
  CHECK(out.output.data()[1] == -2.0);
  CHECK(out.output.data()[2] == 0.5);
}

TEST_CASE("fixed tiny weights match a hand-computed forward") {
  // Tower: conv1d(1ch,k2,s1) -> maxpool(2,2) -> fc(2), input 1x4.
  std::vector<LayerSpec> spec = {LayerSpec::conv1d(1, 2), LayerSpec::maxpool(2, 2),
                                 LayerSpec::fully_connected(2)};
  Rng rng(1);
  ParamRegistry reg;
  FeatureTower tower = FeatureTower::build(spec, 1, 4, rng, "t", reg);

  auto set = [&](const char* name, std::vector<double> vals) {
    auto v = const_cast<Tensor*>(reg.find(name))->data_mut();
    REQUIRE(v.size() == vals.size());
    std::copy(vals.begin(), vals.end(), v.begin());
  };
  set("t.layer0.kernels", {0.5, -0.25});
  set("t.layer0.bias", {0.1});
  set("t.layer2.weight", {1.0, 2.0});   // 2x1
  set("t.layer2.bias", {0.0, -1.0});

  // x = [1 2 3 4]: conv -> [0.5-0.5+0.1, 1-0.75+0.1, 1.5-1+0.1]
  //   = [0.1, 0.35, 0.6]; pool(2,2) over len 3 -> [max(0.1,0.35)] = [0.35]
  // fc: [1*0.35+0, 2*0.35-1] = [0.35, -0.3]
  Tensor x = Tensor::from_data({1, 4}, {1, 2, 3, 4});
  TowerOutput out = tower.forward(x, nullptr);
  CHECK(out.output.data()[0] == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(out.output.data()[1] == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("parameter count is pure shape arithmetic, regression-locked") {
  // Default tower on 1x40: conv 8*1*5+8 = 48; fc 32*(8*18)+32 = 4640.
  CHECK(FeatureTower::param_count(default_tower_spec(), 1, 40) == 48 + 4640);
  // Same spec on a 3-channel group input: conv 8*3*5+8 = 128.
  CHECK(FeatureTower::param_count(default_tower_spec(), 3, 40) == 128 + 4640);

  Rng rng(5);
  ParamRegistry reg;
  FeatureTower tower = FeatureTower::build(default_tower_spec(), 1, 40, rng,
                                           "t", reg);
  CHECK(reg.total_size() == FeatureTower::param_count(default_tower_spec(), 1, 40));
}

TEST_CASE("same seed rebuilds identical initial parameters") {
  for (int round = 0; round < 2; ++round) {
    Rng rng_a(99);
    Rng rng_b(99);
    ParamRegistry reg_a, reg_b;
    FeatureTower::build(default_tower_spec(), 1, 40, rng_a, "t", reg_a);
    FeatureTower::build(default_tower_spec(), 1, 40, rng_b, "t", reg_b);
    REQUIRE(reg_a.all().size() == reg_b.all().size());
    for (std::size_t i = 0; i < reg_a.all().size(); ++i) {
      auto a = reg_a.all()[i].tensor.data();
      auto b = reg_b.all()[i].tensor.data();
      REQUIRE(a.size() == b.size());
      for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
    }
  }
}

TEST_CASE("tower rejects mismatched input shape") {
  Rng rng(1);
  ParamRegistry reg;
  FeatureTower tower =
      FeatureTower::build(default_tower_spec(), 1, 40, rng, "t", reg);
  Tensor wrong = Tensor::zeros({1, 39});
  CHECK_THROWS_AS(tower.forward(wrong, nullptr), DimensionError);
}
