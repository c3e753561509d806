#include <sstream>

#include "doctest.h"
#include "pmatch/error.hpp"
#include "pmatch/io.hpp"
#include "pmatch/pipeline.hpp"

using namespace pmatch;

namespace {

const SceneOutput& sample_scene() {
  static const SceneOutput scene = generate_scene(random_scene_spec(SimConfig{}, 1, 0));
  return scene;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("observations round-trip byte for byte") {
  const auto& obs = sample_scene().observations;
  std::stringstream first;
  write_observations(first, obs);
  const std::string text = first.str();
  std::istringstream in(text);
  const auto back = read_observations(in);
  REQUIRE(back.size() == obs.size());
  std::ostringstream second;
  write_observations(second, back);
  CHECK(second.str() == text);
  CHECK(back.front().key() == obs.front().key());
  CHECK(back.front().pose.x == obs.front().pose.x);
}

TEST_CASE("malformed records report their line number") {
  const auto& obs = sample_scene().observations;
  const std::string good = observation_to_jsonl(obs[0]);
  const std::string cases[] = {"{not json", "{}", good.substr(0, good.size() - 1) + ",\"extra\":1}"};
  for (const auto& bad : cases) {
    std::istringstream in(good + "\n" + bad + "\n");
    try {
      read_observations(in);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  std::istringstream blank("\n" + good + "\n\n");
  CHECK(read_observations(blank).size() == 1);
}

TEST_CASE("duplicate observation keys are rejected at their line") {
  const std::string line = observation_to_jsonl(sample_scene().observations[0]);
  std::istringstream in(line + "\n" + line + "\n");
  try {
    read_observations(in);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("ground truth round-trips with its split") {
  const auto& s = sample_scene();
  std::stringstream os;
  write_ground_truth(os, s.observations, s.truth, {s.observations.front().episode_id});
  std::istringstream in(os.str());
  const LabelFile back = read_ground_truth(in);
  CHECK(back.truth.labels == s.truth.labels);
  for (const auto& [key, split] : back.split) CHECK(split == "test");
}

TEST_CASE("manifest round-trips") {
  const auto& s = sample_scene();
  const PairManifest m = build_manifest(s.observations, MinerConfig{});
  std::stringstream os;
  write_manifest(os, m);
  std::istringstream in(os.str());
  CHECK(read_manifest(in) == m);
}

TEST_CASE("feature tensor round-trips exactly and rejects corruption") {
  const auto& s = sample_scene();
  const FeatureMap feats = synth_views(FeatureModel{}, s.truth, s.observations, 3);
  std::vector<ObservationKey> order;
  for (const auto& [k, v] : feats) order.push_back(k);
  std::stringstream os;
  write_features(os, feats, order);
  const std::string bytes = os.str();
  CHECK(bytes.compare(0, 8, std::string(kFeatureMagic, 8)) == 0);
  std::istringstream in(bytes);
  CHECK(read_features(in) == feats);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream in2(bad_magic);
  CHECK(code_of([&] { read_features(in2); }) == ErrorCode::ParseError);
  std::istringstream in3(bytes.substr(0, bytes.size() - 5));
  CHECK(code_of([&] { read_features(in3); }) == ErrorCode::ParseError);

  std::ostringstream sink;
  std::vector<ObservationKey> missing = order;
  missing.push_back({"ghost", "b0"});
  CHECK(code_of([&] { write_features(sink, feats, missing); }) == ErrorCode::UnknownQuery);
}

TEST_CASE("checkpoint round-trips encoder and config") {
  TrainConfig cfg;
  cfg.method = Method::Triplet;
  cfg.positives = PositiveRegime::Polygon;
  cfg.seed = 11;
  const EncoderStack enc = EncoderStack::create(cfg.encoder, 11);
  const std::string text = checkpoint_to_json(enc, cfg, {1.5, 1.25});
  TrainConfig back;
  CHECK(checkpoint_from_json(text, &back) == enc);
  CHECK(back.method == Method::Triplet);
  CHECK(back.positives == PositiveRegime::Polygon);
  CHECK(back.seed == 11);
  CHECK(checkpoint_to_json(checkpoint_from_json(text), back, {1.5, 1.25}) == text);
  CHECK(code_of([&] { checkpoint_from_json("{\"version\":2}"); }) == ErrorCode::ParseError);
}

TEST_CASE("missing files are io errors") {
  CHECK(code_of([] { read_observations(std::filesystem::path("/nonexistent/obs.jsonl")); }) == ErrorCode::IoError);
}

}  // TEST_SUITE
