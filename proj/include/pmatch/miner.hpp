#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmatch/geometry.hpp"
#include "pmatch/polygon.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {

struct ObservationKey {
  std::string image_id;
  std::string box_id;

  auto operator<=>(const ObservationKey&) const = default;
};

struct Observation {
  std::string agent_id;
  std::string episode_id;
  std::string image_id;
  std::string box_id;
  PixelBox bbox;
  RobotPose pose;
  CameraModel camera;
  double timestamp = 0.0;

  ObservationKey key() const { return {image_id, box_id}; }
  PolygonSource source() const { return {agent_id, episode_id, image_id, box_id}; }

  /// Ingest checks: ids non-empty, finite timestamp, bbox inside the image,
  /// camera and pose invariants.
  void validate() const;
};

struct MinerConfig {
  double max_depth = kDefaultMaxDepth;  // meters from the robot center
  double min_overlap_area = kAreaEpsilon;
  double min_iou = 0.0;  // 0 disables IoU gating
  double grid_cell = 0.25;

  void validate() const;
};

struct Rejection {
  ObservationKey key;
  RejectReason reason;
};

struct FootprintSet {
  std::vector<FloorPolygon> footprints;
  std::vector<Rejection> rejections;
};

/// One footprint per accepted observation. Geometry failures are logged as
/// rejections, never thrown.
FootprintSet build_footprints(std::span<const Observation> observations, const MinerConfig& config);

struct Candidate {
  ObservationKey key;
  double overlap_m2 = 0.0;
  double iou = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// Query box -> matched candidates, sorted by overlap area descending.
struct PairManifest {
  std::map<ObservationKey, std::vector<Candidate>> entries;

  void add_query(const ObservationKey& key) { entries.try_emplace(key); }
  bool contains(const ObservationKey& key) const { return entries.count(key) != 0; }

  /// Throws UnknownQuery.
  const std::vector<Candidate>& candidates(const ObservationKey& key) const;

  /// Unordered pair count (each pair is stored under both boxes).
  std::size_t pair_count() const;

  bool operator==(const PairManifest&) const = default;
};

/// Uniform grid over footprint AABBs. Immutable once constructed.
class SpatialIndex {
 public:
  SpatialIndex(std::span<const FloorPolygon> polygons, double cell_size);

  /// Sorted, de-duplicated ids of polygons whose cells touch `box`.
  std::vector<std::size_t> query(const Aabb& box) const;

  std::size_t cell_count() const { return cells_.size(); }

 private:
  struct CellRange {
    std::int64_t x0, y0, x1, y1;
  };
  CellRange range(const Aabb& box) const;
  static std::int64_t cell_key(std::int64_t ix, std::int64_t iy) { return (ix << 32) ^ (iy & 0xffffffff); }

  double cell_size_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

/// Algorithm: per (agent, episode) group, index footprints on a grid and
/// record every pair whose overlap passes the config thresholds.
PairManifest mine_pairs(std::span<const FloorPolygon> footprints, const MinerConfig& config);

/// Uniformly random candidate, nullopt for an empty list. Throws UnknownQuery.
std::optional<ObservationKey> sample_positive(const PairManifest& manifest, const ObservationKey& query,
                                              Rng& rng);
std::optional<ObservationKey> sample_positive(const PairManifest& manifest, const ObservationKey& query,
                                              std::uint64_t seed);

/// True when two candidates pass the config's overlap and IoU gates.
bool passes_overlap_gate(double overlap_m2, double iou_value, const MinerConfig& config);

void sort_candidates(std::vector<Candidate>& candidates);

}  // namespace pmatch
