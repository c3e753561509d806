#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmatch/eval.hpp"
#include "pmatch/miner.hpp"
#include "pmatch/pipeline.hpp"
#include "pmatch/ssl.hpp"

namespace pmatch {

/// Environment variable naming a default config file.
inline constexpr const char* kConfigEnvVar = "PMATCH_CONFIG";

struct PipelineConfig {
  DatasetConfig data;
  MinerConfig miner;
  TrainConfig train;
  ProbeConfig probe;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  void validate() const;
};

/// JSON with optional sections "simulation", "features", "miner", "train",
/// "probe" and a top-level "seeds" array. Unknown keys are ConfigError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Every key with its default value.
std::string default_config_json();

}  // namespace pmatch
