#include "pmatch/miner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include "pmatch/error.hpp"

namespace pmatch {

void Observation::validate() const {
  if (agent_id.empty() || episode_id.empty() || image_id.empty() || box_id.empty())
    throw Error(ErrorCode::ParseError, "identifiers must be non-empty");
  if (!std::isfinite(timestamp)) throw Error(ErrorCode::ParseError, "timestamp must be finite");
  camera.intrinsics.validate();
  camera.extrinsics.validate();
  if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || !std::isfinite(pose.heading))
    throw Error(ErrorCode::InvalidPose, "pose must be finite");
  if (pose.heading <= -std::numbers::pi || pose.heading > std::numbers::pi)
    throw Error(ErrorCode::InvalidPose, "heading must lie in (-pi, pi]");
  if (!(pose.mount_height > 0.0) || !std::isfinite(pose.mount_height))
    throw Error(ErrorCode::InvalidPose, "camera height must be positive");
  const auto& k = camera.intrinsics;
  if (!(bbox.xmin >= 0.0 && bbox.ymin >= 0.0 && bbox.xmax <= k.width && bbox.ymax <= k.height &&
        bbox.width() > 0.0 && bbox.height() > 0.0))
    throw Error(ErrorCode::InvalidBBox, "bbox must have positive size inside the image");
}

void MinerConfig::validate() const {
  if (!(max_depth > 0.0) || !std::isfinite(max_depth))
    throw Error(ErrorCode::ConfigError, "max_depth must be positive");
  if (!(min_overlap_area >= 0.0) || !std::isfinite(min_overlap_area))
    throw Error(ErrorCode::ConfigError, "min_overlap_area must be non-negative");
  if (!(min_iou >= 0.0 && min_iou <= 1.0)) throw Error(ErrorCode::ConfigError, "min_iou must lie in [0, 1]");
  if (!(grid_cell > 0.0) || !std::isfinite(grid_cell))
    throw Error(ErrorCode::ConfigError, "grid_cell must be positive");
}

FootprintSet build_footprints(std::span<const Observation> observations, const MinerConfig& config) {
  config.validate();
  FootprintSet out;
  for (const auto& obs : observations) {
    try {
      const FloorHomography h = floor_homography(obs.camera, obs.pose);
      auto result = project_bbox_footprint(h, obs.bbox, obs.pose, config.max_depth, obs.source());
      if (auto* polygon = std::get_if<FloorPolygon>(&result)) {
        out.footprints.push_back(std::move(*polygon));
      } else {
        out.rejections.push_back({obs.key(), std::get<RejectReason>(result)});
      }
    } catch (const Error&) {
      out.rejections.push_back({obs.key(), RejectReason::Degenerate});
    }
  }
  return out;
}

const std::vector<Candidate>& PairManifest::candidates(const ObservationKey& key) const {
  const auto it = entries.find(key);
  if (it == entries.end())
    throw Error(ErrorCode::UnknownQuery, "no manifest entry for " + key.image_id + "/" + key.box_id);
  return it->second;
}

std::size_t PairManifest::pair_count() const {
  std::size_t n = 0;
  for (const auto& [key, list] : entries) n += list.size();
  return n / 2;
}

SpatialIndex::SpatialIndex(std::span<const FloorPolygon> polygons, double cell_size) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::ConfigError, "grid cell must be positive");
  for (std::size_t id = 0; id < polygons.size(); ++id) {
    const CellRange r = range(bounds(polygons[id]));
    for (std::int64_t ix = r.x0; ix <= r.x1; ++ix)
      for (std::int64_t iy = r.y0; iy <= r.y1; ++iy) cells_[cell_key(ix, iy)].push_back(id);
  }
}

SpatialIndex::CellRange SpatialIndex::range(const Aabb& box) const {
  return {static_cast<std::int64_t>(std::floor(box.min.x() / cell_size_)),
          static_cast<std::int64_t>(std::floor(box.min.y() / cell_size_)),
          static_cast<std::int64_t>(std::floor(box.max.x() / cell_size_)),
          static_cast<std::int64_t>(std::floor(box.max.y() / cell_size_))};
}

std::vector<std::size_t> SpatialIndex::query(const Aabb& box) const {
  std::vector<std::size_t> ids;
  const CellRange r = range(box);
  for (std::int64_t ix = r.x0; ix <= r.x1; ++ix) {
    for (std::int64_t iy = r.y0; iy <= r.y1; ++iy) {
      const auto it = cells_.find(cell_key(ix, iy));
      if (it != cells_.end()) ids.insert(ids.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

bool passes_overlap_gate(double overlap_m2, double iou_value, const MinerConfig& config) {
  if (!(overlap_m2 > 0.0) || overlap_m2 < config.min_overlap_area) return false;
  return config.min_iou <= 0.0 || iou_value >= config.min_iou;
}

void sort_candidates(std::vector<Candidate>& candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap_m2 != b.overlap_m2) return a.overlap_m2 > b.overlap_m2;
    return a.key < b.key;
  });
}

PairManifest mine_pairs(std::span<const FloorPolygon> footprints, const MinerConfig& config) {
  config.validate();
  PairManifest manifest;

  // Deterministic grouping: (agent, episode) -> footprint indices in input order.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < footprints.size(); ++i) {
    const auto& src = footprints[i].source;
    const ObservationKey key{src.image_id, src.box_id};
    if (manifest.contains(key))
      throw Error(ErrorCode::DuplicateKey, "duplicate footprint " + key.image_id + "/" + key.box_id);
    manifest.add_query(key);
    groups[{src.agent_id, src.episode_id}].push_back(i);
  }

  for (const auto& [group, members] : groups) {
    std::vector<FloorPolygon> local;
    local.reserve(members.size());
    for (std::size_t i : members) local.push_back(footprints[i]);
    const SpatialIndex index(local, config.grid_cell);

    for (std::size_t a = 0; a < local.size(); ++a) {
      for (std::size_t b : index.query(bounds(local[a]))) {
        if (b <= a) continue;
        const double overlap = overlap_area(local[a], local[b]);
        if (overlap <= 0.0) continue;
        const double union_area = area(local[a]) + area(local[b]) - overlap;
        const double iou_value = std::clamp(overlap / union_area, 0.0, 1.0);
        if (!passes_overlap_gate(overlap, iou_value, config)) continue;
        const ObservationKey ka{local[a].source.image_id, local[a].source.box_id};
        const ObservationKey kb{local[b].source.image_id, local[b].source.box_id};
        manifest.entries[ka].push_back({kb, overlap, iou_value});
        manifest.entries[kb].push_back({ka, overlap, iou_value});
      }
    }
  }
  for (auto& [key, list] : manifest.entries) sort_candidates(list);
  return manifest;
}

std::optional<ObservationKey> sample_positive(const PairManifest& manifest, const ObservationKey& query,
                                              Rng& rng) {
  const auto& list = manifest.candidates(query);
  if (list.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
  return list[pick(rng)].key;
}

std::optional<ObservationKey> sample_positive(const PairManifest& manifest, const ObservationKey& query,
                                              std::uint64_t seed) {
  Rng rng(seed);
  return sample_positive(manifest, query, rng);
}

}  // namespace pmatch
