#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pmatch/miner.hpp"
#include "pmatch/simulator.hpp"
#include "pmatch/ssl.hpp"

// Interchange formats. Everything is JSONL except the feature tensor.
//
// features.bin (little-endian):
//   char[8]  magic "PMFEAT01"
//   u32      version (1)
//   u32      dim
//   u64      count
//   count x { u32 len, image_id bytes, u32 len, box_id bytes, dim x f64 }
namespace pmatch {

inline constexpr char kFeatureMagic[8] = {'P', 'M', 'F', 'E', 'A', 'T', '0', '1'};
inline constexpr std::uint32_t kFeatureVersion = 1;

std::string observation_to_jsonl(const Observation& obs);
/// Parses and validates one record; errors carry the line number.
Observation observation_from_jsonl(const std::string& line, std::size_t line_number);

void write_observations(std::ostream& os, const std::vector<Observation>& observations);
std::vector<Observation> read_observations(std::istream& is);
std::vector<Observation> read_observations(const std::filesystem::path& path);

/// Detection labels plus the train/test split of each record.
struct LabelFile {
  GroundTruth truth;
  std::map<ObservationKey, std::string> split;        // "train" | "test"
  std::map<ObservationKey, std::string> agent_of;     // agent id
  std::map<ObservationKey, std::string> episode_of;   // episode id
};

void write_ground_truth(std::ostream& os, const std::vector<Observation>& observations, const GroundTruth& truth,
                        const std::set<std::string>& test_episodes);
LabelFile read_ground_truth(std::istream& is);
LabelFile read_ground_truth(const std::filesystem::path& path);

void write_manifest(std::ostream& os, const PairManifest& manifest);
PairManifest read_manifest(std::istream& is);
PairManifest read_manifest(const std::filesystem::path& path);

void write_rejections(std::ostream& os, const std::vector<Rejection>& rejections);

/// Writes records in `order`; every key must be present in `features`.
void write_features(std::ostream& os, const FeatureMap& features, const std::vector<ObservationKey>& order);
FeatureMap read_features(std::istream& is);
FeatureMap read_features(const std::filesystem::path& path);

void write_loss_curve(std::ostream& os, const std::vector<double>& curve);

std::string checkpoint_to_json(const EncoderStack& encoder, const TrainConfig& config,
                               const std::vector<double>& loss_curve);
EncoderStack checkpoint_from_json(const std::string& text, TrainConfig* config = nullptr);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pmatch
