#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pmatch {

// Smallest overlap area (m^2) treated as a real intersection.
inline constexpr double kAreaEpsilon = 1e-8;

struct PolygonSource {
  std::string agent_id;
  std::string episode_id;
  std::string image_id;
  std::string box_id;
};

/// Convex floor-plane polygon in world meters, vertices counterclockwise.
struct FloorPolygon {
  std::vector<Eigen::Vector2d> vertices;
  PolygonSource source;
};

struct Aabb {
  Eigen::Vector2d min;
  Eigen::Vector2d max;
};

/// Monotone-chain hull. Interior and collinear boundary points are dropped,
/// so the result has no repeated or straight-angle vertices.
/// Throws Error(CollinearInput) when fewer than three hull vertices remain.
FloorPolygon convex_hull(std::span<const Eigen::Vector2d> points);

/// Shoelace area; positive for a valid counterclockwise polygon.
double area(const FloorPolygon& polygon);
double signed_area(std::span<const Eigen::Vector2d> ring);

/// Convex clip of `a` against `b`. Returns nullopt when the overlap area is
/// below kAreaEpsilon. The result carries a's source tag.
std::optional<FloorPolygon> intersect(const FloorPolygon& a, const FloorPolygon& b);

double overlap_area(const FloorPolygon& a, const FloorPolygon& b);
double iou(const FloorPolygon& a, const FloorPolygon& b);

bool contains(const FloorPolygon& polygon, const Eigen::Vector2d& point, double tolerance = 0.0);

/// Euclidean distance from `point` to the polygon region (0 when inside).
double distance_to(const FloorPolygon& polygon, const Eigen::Vector2d& point);

/// Largest vertex-to-vertex distance.
double diameter(const FloorPolygon& polygon);

Aabb bounds(const FloorPolygon& polygon);
FloorPolygon translated(FloorPolygon polygon, const Eigen::Vector2d& offset);

/// Checks the FloorPolygon invariants (>= 3 vertices, convex, CCW, positive
/// area, no duplicate consecutive vertices).
bool is_valid(const FloorPolygon& polygon);

}  // namespace pmatch
