#pragma once

// Independent reference implementations the library is checked against.
// None of these call into the code under test except for plain data types.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pmatch/error.hpp"
#include "pmatch/geometry.hpp"
#include "pmatch/miner.hpp"
#include "pmatch/polygon.hpp"

namespace oracle {

// Camera center and world->camera rotation computed from scratch: mount frame
// rotated by heading about world z, lifted by mount height, then the mount
// extrinsics applied.
struct Camera {
  Eigen::Matrix3d K;
  Eigen::Matrix3d R;  // camera <- world
  Eigen::Vector3d t;  // camera <- world
  Eigen::Vector3d center;
};

inline Camera make_camera(const pmatch::CameraIntrinsics& intr, const pmatch::CameraExtrinsics& extr,
                          const pmatch::RobotPose& pose) {
  const Eigen::Matrix3d world_from_mount = Eigen::AngleAxisd(pose.heading, Eigen::Vector3d::UnitZ()).matrix();
  const Eigen::Vector3d mount_origin(pose.x, pose.y, pose.mount_height);
  Camera c;
  c.K << intr.fx, intr.skew, intr.cx, 0, intr.fy, intr.cy, 0, 0, 1;
  // p_cam = Rm * (Rwm^T (p - o)) + tm
  c.R = extr.rotation * world_from_mount.transpose();
  c.t = extr.translation - c.R * mount_origin;
  c.center = -c.R.transpose() * c.t;
  return c;
}

// Two-step projection of a world point: rigid transform, then intrinsics.
inline Eigen::Vector2d project(const Camera& c, const Eigen::Vector3d& world) {
  const Eigen::Vector3d cam = c.R * world + c.t;
  const Eigen::Vector3d img = c.K * cam;
  return img.head<2>() / img.z();
}

// Intersect the back-projected pixel ray with z = 0. nullopt when the ray is
// parallel to the floor or meets it behind the camera.
inline std::optional<Eigen::Vector2d> ray_floor(const Camera& c, double u, double v) {
  const Eigen::Vector3d dir_cam = c.K.inverse() * Eigen::Vector3d(u, v, 1.0);
  const Eigen::Vector3d dir = c.R.transpose() * dir_cam;
  if (std::abs(dir.z()) < 1e-15) return std::nullopt;
  const double s = -c.center.z() / dir.z();
  if (s <= 0.0) return std::nullopt;
  return (c.center + s * dir).head<2>();
}

// Point in convex CCW polygon by half-plane tests.
inline bool inside_convex(const std::vector<Eigen::Vector2d>& v, const Eigen::Vector2d& p) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % v.size()];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross < 0.0) return false;
  }
  return true;
}

struct MonteCarlo {
  double area_a = 0.0;
  double area_b = 0.0;
  double overlap = 0.0;
};

// Uniform samples over the union bounding box.
inline MonteCarlo monte_carlo(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b,
                              int samples, std::uint64_t seed) {
  Eigen::Vector2d lo = a[0], hi = a[0];
  for (const auto* poly : {&a, &b})
    for (const auto& p : *poly) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  long in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < samples; ++i) {
    const Eigen::Vector2d p(ux(rng), uy(rng));
    const bool ia = inside_convex(a, p), ib = inside_convex(b, p);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const double box = (hi - lo).prod();
  return {box * in_a / samples, box * in_b / samples, box * in_both / samples};
}

// Gift-wrapping hull (different algorithm from the library's monotone chain).
inline std::vector<Eigen::Vector2d> jarvis_hull(const std::vector<Eigen::Vector2d>& pts) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].x() < pts[start].x() || (pts[i].x() == pts[start].x() && pts[i].y() < pts[start].y())) start = i;
  std::vector<Eigen::Vector2d> hull;
  std::size_t cur = start;
  do {
    hull.push_back(pts[cur]);
    std::size_t next = (cur + 1) % pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Eigen::Vector2d a = pts[next] - pts[cur], b = pts[i] - pts[cur];
      const double cross = a.x() * b.y() - a.y() * b.x();
      if (cross < 0.0 || (cross == 0.0 && b.squaredNorm() > a.squaredNorm())) next = i;
    }
    cur = next;
  } while (cur != start && hull.size() <= pts.size());
  return hull;
}

// Random convex polygon: hull of random points on a jittered circle.
inline pmatch::FloorPolygon random_convex(std::mt19937_64& rng, Eigen::Vector2d center, double radius) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI), scale(0.3, 1.0);
  std::uniform_int_distribution<int> count(3, 9);
  for (;;) {
    std::vector<Eigen::Vector2d> pts;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double a = angle(rng), r = radius * scale(rng);
      pts.push_back(center + r * Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
    try {
      auto poly = pmatch::convex_hull(pts);
      if (pmatch::area(poly) > 1e-3 * radius * radius) return poly;
    } catch (const pmatch::Error&) {
    }
  }
}

using PairKey = std::tuple<std::string, std::string, std::string, std::string>;

// O(n^2) scan: every ordered pair within one (agent, episode) group that passes
// the overlap gates. Uses the polygon kernel for areas, so it checks the index
// and bookkeeping, not the clipper.
inline std::set<PairKey> brute_force_pairs(const std::vector<pmatch::FloorPolygon>& fps,
                                           const pmatch::MinerConfig& cfg) {
  std::set<PairKey> out;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    for (std::size_t j = 0; j < fps.size(); ++j) {
      if (i == j) continue;
      const auto& a = fps[i].source;
      const auto& b = fps[j].source;
      if (a.agent_id != b.agent_id || a.episode_id != b.episode_id) continue;
      const double ov = pmatch::overlap_area(fps[i], fps[j]);
      if (!(ov > 0.0) || ov < cfg.min_overlap_area) continue;
      if (cfg.min_iou > 0.0 && pmatch::iou(fps[i], fps[j]) < cfg.min_iou) continue;
      out.emplace(a.image_id, a.box_id, b.image_id, b.box_id);
    }
  }
  return out;
}

inline std::set<PairKey> manifest_pairs(const pmatch::PairManifest& m) {
  std::set<PairKey> out;
  for (const auto& [q, cands] : m.entries)
    for (const auto& c : cands) out.emplace(q.image_id, q.box_id, c.key.image_id, c.key.box_id);
  return out;
}

// Random footprints scattered over a room, split among a few groups.
inline std::vector<pmatch::FloorPolygon> random_footprints(std::mt19937_64& rng, int n, double room, int groups) {
  std::uniform_real_distribution<double> pos(0.0, room), size(0.05, 0.6);
  std::uniform_int_distribution<int> group(0, groups - 1);
  std::vector<pmatch::FloorPolygon> out;
  for (int i = 0; i < n; ++i) {
    auto poly = random_convex(rng, {pos(rng), pos(rng)}, size(rng));
    const int g = group(rng);
    poly.source = {"agent-" + std::to_string(g % 2), "ep" + std::to_string(g), "img" + std::to_string(i), "b0"};
    out.push_back(std::move(poly));
  }
  return out;
}

}  // namespace oracle
