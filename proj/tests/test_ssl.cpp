#include <cmath>
#include <map>

#include "doctest.h"
#include "pmatch/error.hpp"
#include "pmatch/pipeline.hpp"
#include "pmatch/ssl.hpp"

using namespace pmatch;

namespace {

SslDataset toy_dataset(int n, int dim = 16) {
  Rng rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ObservationKey> keys;
  for (int i = 0; i < n; ++i) keys.push_back({"img" + std::to_string(i), "b0"});
  return SslDataset(keys, Eigen::MatrixXd::NullaryExpr(dim, n, [&] { return normal(rng); }));
}

AugmentationPolicy no_augmentation() { return AugmentationPolicy{0.0, 0.0, 0.0}; }

TrainConfig quick_config(Method m, PositiveRegime r) {
  TrainConfig cfg;
  cfg.method = m;
  cfg.positives = r;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  return cfg;
}

}  // namespace

TEST_SUITE("ssl") {

TEST_CASE("method and regime names round-trip") {
  for (Method m : {Method::SimClr, Method::SimSiam, Method::Triplet}) CHECK(parse_method(to_string(m)) == m);
  for (PositiveRegime r : {PositiveRegime::Standard, PositiveRegime::Polygon}) CHECK(parse_regime(to_string(r)) == r);
  CHECK_THROWS_AS(parse_method("byol"), Error);
}

TEST_CASE("augmenting twice gives two distinct views") {
  const AugmentationPolicy policy;
  Rng rng(1);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(16, -1.0, 1.0);
  const Eigen::VectorXd a = policy.apply(x, rng), b = policy.apply(x, rng);
  CHECK((a - b).norm() > 0.0);
  CHECK(no_augmentation().apply(x, rng) == x);
}

TEST_CASE("make_pair regimes") {
  const SslDataset data = toy_dataset(6);
  PairManifest m;
  for (const auto& k : data.keys()) m.add_query(k);
  m.entries[{"img1", "b0"}] = {Candidate{{"img2", "b0"}, 0.1, 0.1}};
  m.entries[{"img3", "b0"}] = {Candidate{{"img0", "b0"}, 0.3, 0.2}, Candidate{{"img4", "b0"}, 0.2, 0.2},
                               Candidate{{"img5", "b0"}, 0.1, 0.1}};
  Rng rng(2);
  const auto policy = no_augmentation();

  SUBCASE("empty candidate list falls back to self augmentation") {
    const ViewPair p = make_pair({"img0", "b0"}, PositiveRegime::Polygon, &m, data, policy, rng);
    CHECK_FALSE(p.partner);
    CHECK(p.first == data.features().col(0));
    CHECK(p.second == data.features().col(0));
  }
  SUBCASE("single candidate is always the second view") {
    for (int i = 0; i < 20; ++i) {
      const ViewPair p = make_pair({"img1", "b0"}, PositiveRegime::Polygon, &m, data, policy, rng);
      REQUIRE(p.partner);
      CHECK(*p.partner == ObservationKey{"img2", "b0"});
      CHECK(p.second == data.features().col(2));
    }
  }
  SUBCASE("standard regime ignores the manifest") {
    const ViewPair p = make_pair({"img1", "b0"}, PositiveRegime::Standard, &m, data, policy, rng);
    CHECK_FALSE(p.partner);
    CHECK(p.second == data.features().col(1));
  }
  SUBCASE("three candidates are used uniformly") {
    std::map<std::string, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
      ++counts[make_pair({"img3", "b0"}, PositiveRegime::Polygon, &m, data, policy, rng).partner->image_id];
    const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
    REQUIRE(counts.size() == 3);
    for (const auto& [id, c] : counts) CHECK(std::abs(c - n / 3.0) < 3 * sigma);
  }
  SUBCASE("unknown query") {
    CHECK_THROWS_AS(make_pair({"nope", "b0"}, PositiveRegime::Standard, &m, data, policy, rng), Error);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const SslDataset data = toy_dataset(40);
  for (Method m : {Method::SimClr, Method::SimSiam, Method::Triplet}) {
    TrainConfig cfg = quick_config(m, PositiveRegime::Standard);
    cfg.epochs = 1;
    cfg.learning_rate = 0.0;
    const TrainResult r = train(data, nullptr, cfg);
    CHECK(r.encoder == EncoderStack::create(cfg.encoder, cfg.seed));
    CHECK(r.loss_curve.size() == 1);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const SslDataset data = toy_dataset(50);
  for (Method m : {Method::SimClr, Method::SimSiam, Method::Triplet}) {
    const TrainConfig cfg = quick_config(m, PositiveRegime::Standard);
    const TrainResult a = train(data, nullptr, cfg);
    const TrainResult b = train(data, nullptr, cfg);
    CHECK(a.encoder == b.encoder);
    CHECK(a.loss_curve == b.loss_curve);
    TrainConfig other = cfg;
    other.seed = 99;
    CHECK_FALSE(train(data, nullptr, other).encoder == a.encoder);
  }
}

TEST_CASE("training input checks") {
  const SslDataset data = toy_dataset(10);
  CHECK_THROWS_AS(train(data, nullptr, quick_config(Method::SimClr, PositiveRegime::Polygon)), Error);
  TrainConfig bad = quick_config(Method::SimClr, PositiveRegime::Standard);
  bad.temperature = 0.0;
  CHECK_THROWS_AS(train(data, nullptr, bad), Error);
  bad = quick_config(Method::Triplet, PositiveRegime::Standard);
  bad.margin = -1.0;
  CHECK_THROWS_AS(train(data, nullptr, bad), Error);
  CHECK_THROWS_AS(train(toy_dataset(10, 5), nullptr, quick_config(Method::SimClr, PositiveRegime::Standard)), Error);
}

TEST_CASE("runaway learning rate is reported as divergence") {
  const SslDataset data = toy_dataset(64);
  TrainConfig cfg = quick_config(Method::Triplet, PositiveRegime::Standard);
  cfg.learning_rate = 1e150;
  try {
    train(data, nullptr, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergenceDetected);
  }
}

TEST_CASE("polygon positives on separated scenes never cross instances") {
  SimConfig sim;
  const SceneOutput scene = generate_scene(separated_scene_spec(sim, 2, 0, separation_spacing(sim)));
  const PairManifest m = build_manifest(scene.observations, MinerConfig{});
  const FeatureMap feats = synth_views(FeatureModel{}, scene.truth, scene.observations, 1);
  std::vector<ObservationKey> keys;
  Eigen::MatrixXd x(16, static_cast<Eigen::Index>(feats.size()));
  for (const auto& [k, v] : feats) {
    x.col(static_cast<Eigen::Index>(keys.size())) = v;
    keys.push_back(k);
  }
  const SslDataset data(keys, x);
  Rng rng(5);
  int partnered = 0;
  for (const auto& k : keys) {
    const ViewPair p = make_pair(k, PositiveRegime::Polygon, &m, data, AugmentationPolicy{}, rng);
    if (!p.partner) continue;
    ++partnered;
    CHECK(scene.truth.labels.at(*p.partner).instance_id == scene.truth.labels.at(k).instance_id);
  }
  CHECK(partnered > 0);
}

TEST_CASE("default training lowers the NT-Xent loss on the synthetic dataset") {
  const Dataset d = simulate_dataset(DatasetConfig{});
  const SplitFeatures split = split_features(d);
  TrainConfig cfg;
  const TrainResult r = train(split.train, nullptr, cfg);
  CHECK(r.final_loss < r.initial_loss);
  CHECK(r.loss_curve.size() == static_cast<std::size_t>(cfg.epochs));
  CHECK(r.loss_curve.back() < r.loss_curve.front());
}

}  // TEST_SUITE
