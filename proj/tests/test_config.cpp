#include "doctest.h"
#include "pmatch/config.hpp"
#include "pmatch/error.hpp"

using namespace pmatch;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("empty config yields the defaults") {
  const PipelineConfig c = parse_config("{}");
  CHECK(c.miner.max_depth == 0.7);
  CHECK(c.train.temperature == 0.5);
  CHECK(c.seeds.size() >= 5);
  CHECK(c.probe.fractions == std::vector<double>{0.01, 0.10, 1.00});
}

TEST_CASE("default json parses back to the defaults") {
  const PipelineConfig a = parse_config(default_config_json());
  const PipelineConfig b = parse_config("{}");
  CHECK(a.miner.max_depth == b.miner.max_depth);
  CHECK(a.train.batch_size == b.train.batch_size);
  CHECK(a.data.features.class_scale == b.data.features.class_scale);
  CHECK(a.data.scenes == b.data.scenes);
  CHECK(default_config_json() == default_config_json());
}

TEST_CASE("overrides are applied") {
  const PipelineConfig c = parse_config(
      R"({"miner":{"max_depth":0.9},"train":{"method":"triplet","epochs":3,"encoder":{"hidden_dim":12}},)"
      R"("features":{"dim":20},"seeds":[7]})");
  CHECK(c.miner.max_depth == 0.9);
  CHECK(c.train.method == Method::Triplet);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.encoder.hidden_dim == 12);
  CHECK(c.data.features.dim == 20);
  CHECK(c.train.encoder.input_dim == 20);
  CHECK(c.seeds == std::vector<std::uint64_t>{7});
}

TEST_CASE("unknown keys, bad types and invalid values are config errors") {
  CHECK(code_of(R"({"minor":{}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"miner":{"max_dept":1}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"miner":{"max_depth":"far"}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"miner":{"max_depth":-1}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"train":{"method":"byol"}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"simulation":{"scenes":0}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"seeds":[]})") == ErrorCode::ConfigError);
  CHECK(code_of("[1,2]") == ErrorCode::ConfigError);
  CHECK(code_of("{broken") == ErrorCode::ConfigError);
}

}  // TEST_SUITE
