#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pmatch/eval.hpp"
#include "pmatch/miner.hpp"
#include "pmatch/simulator.hpp"
#include "pmatch/ssl.hpp"

namespace pmatch {

struct DatasetConfig {
  SimConfig sim;
  FeatureModel features;
  int scenes = 36;
  int test_scenes = 12;  // the last scenes are held out
  std::uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  std::vector<Observation> observations;
  GroundTruth truth;
  FeatureMap features;
  std::set<std::string> test_episodes;

  bool is_test(const Observation& obs) const { return test_episodes.count(obs.episode_id) != 0; }
};

Dataset simulate_dataset(const DatasetConfig& config);

/// Footprints + mined pairs; rejected observations get empty candidate lists
/// so every observation is a valid query.
PairManifest build_manifest(std::span<const Observation> observations, const MinerConfig& config,
                            FootprintSet* footprints = nullptr);

struct SplitFeatures {
  SslDataset train;
  std::vector<int> train_labels;
  SslDataset test;
  std::vector<int> test_labels;
};

SplitFeatures split_features(const Dataset& dataset);

struct GridSpec {
  std::vector<Method> methods{Method::SimClr, Method::SimSiam, Method::Triplet};
  std::vector<PositiveRegime> regimes{PositiveRegime::Standard, PositiveRegime::Polygon};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  TrainConfig train;  // method, positives and seed are overridden per cell
  ProbeConfig probe;
  int threads = 1;
};

struct TrainedRun {
  Method method;
  PositiveRegime regime;
  std::uint64_t seed;
  TrainResult result;
};

/// Trains every (method, regime, seed) on the train split, probes frozen f
/// features at each label fraction and scores the held-out split. Output
/// order does not depend on the thread count.
EvalReport run_eval_grid(const Dataset& dataset, const PairManifest* manifest, const GridSpec& spec,
                         std::vector<TrainedRun>* runs = nullptr);

/// "start:stop:step", inclusive of stop up to rounding.
std::vector<double> parse_depth_range(const std::string& text);

struct SweepRow {
  double depth = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t pairs = 0;
  double precision = 1.0;
  double recall = 0.0;
  double coverage = 0.0;  // true mined pairs / all same-instance pairs in a group, at any depth
  std::optional<double> top1;
  std::optional<double> balanced_top1;
};

std::vector<SweepRow> sweep_depth(std::span<const Observation> observations, const GroundTruth& truth,
                                  std::span<const double> depths, const MinerConfig& base);

std::string sweep_to_csv(std::span<const SweepRow> rows);

}  // namespace pmatch
