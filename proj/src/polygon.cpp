#include "pmatch/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmatch/error.hpp"

namespace pmatch {
namespace {

constexpr double kDuplicateTolerance = 1e-12;

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool near(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a - b).cwiseAbs().maxCoeff() <= kDuplicateTolerance;
}

void drop_duplicates(std::vector<Eigen::Vector2d>& ring) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(ring.size());
  for (const auto& p : ring) {
    if (out.empty() || !near(out.back(), p)) out.push_back(p);
  }
  while (out.size() > 1 && near(out.front(), out.back())) out.pop_back();
  ring = std::move(out);
}

// Intersection of segment p->q with the infinite line a->b.
Eigen::Vector2d line_hit(const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                         const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return p + t * (q - p);
}

}  // namespace

FloorPolygon convex_hull(std::span<const Eigen::Vector2d> points) {
  std::vector<Eigen::Vector2d> pts(points.begin(), points.end());
  for (const auto& p : pts) {
    if (!p.allFinite()) throw Error(ErrorCode::CollinearInput, "non-finite hull input");
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  drop_duplicates(pts);
  if (pts.size() < 3) throw Error(ErrorCode::CollinearInput, "fewer than three distinct points");

  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  drop_duplicates(hull);
  if (hull.size() < 3) throw Error(ErrorCode::CollinearInput, "points are collinear");
  return FloorPolygon{std::move(hull), {}};
}

double signed_area(std::span<const Eigen::Vector2d> ring) {
  if (ring.size() < 3) return 0.0;
  // Anchored at the first vertex so large world offsets do not cancel.
  const Eigen::Vector2d& o = ring[0];
  double twice = 0.0;
  for (std::size_t i = 1; i + 1 < ring.size(); ++i) twice += cross(o, ring[i], ring[i + 1]);
  return 0.5 * twice;
}

double area(const FloorPolygon& polygon) { return signed_area(polygon.vertices); }

std::optional<FloorPolygon> intersect(const FloorPolygon& a, const FloorPolygon& b) {
  std::vector<Eigen::Vector2d> output = a.vertices;
  const auto& clip = b.vertices;
  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Eigen::Vector2d& ca = clip[e];
    const Eigen::Vector2d& cb = clip[(e + 1) % clip.size()];
    std::vector<Eigen::Vector2d> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Eigen::Vector2d& cur = input[i];
      const Eigen::Vector2d& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = cross(ca, cb, cur) >= 0.0;
      const bool prev_in = cross(ca, cb, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(line_hit(prev, cur, ca, cb));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(line_hit(prev, cur, ca, cb));
      }
    }
  }
  drop_duplicates(output);
  if (output.size() < 3 || signed_area(output) < kAreaEpsilon) return std::nullopt;
  return FloorPolygon{std::move(output), a.source};
}

double overlap_area(const FloorPolygon& a, const FloorPolygon& b) {
  const auto clipped = intersect(a, b);
  return clipped ? area(*clipped) : 0.0;
}

double iou(const FloorPolygon& a, const FloorPolygon& b) {
  const double inter = overlap_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = area(a) + area(b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const FloorPolygon& polygon, const Eigen::Vector2d& point, double tolerance) {
  const auto& v = polygon.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % v.size()];
    const double len = (b - a).norm();
    if (cross(a, b, point) < -tolerance * len) return false;
  }
  return true;
}

double distance_to(const FloorPolygon& polygon, const Eigen::Vector2d& point) {
  if (contains(polygon, point)) return 0.0;
  const auto& v = polygon.vertices;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % v.size()];
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((point - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (a + t * ab - point).norm());
  }
  return best;
}

double diameter(const FloorPolygon& polygon) {
  double best = 0.0;
  const auto& v = polygon.vertices;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) best = std::max(best, (v[i] - v[j]).norm());
  return best;
}

Aabb bounds(const FloorPolygon& polygon) {
  Aabb box{polygon.vertices.front(), polygon.vertices.front()};
  for (const auto& p : polygon.vertices) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

FloorPolygon translated(FloorPolygon polygon, const Eigen::Vector2d& offset) {
  for (auto& p : polygon.vertices) p += offset;
  return polygon;
}

bool is_valid(const FloorPolygon& polygon) {
  const auto& v = polygon.vertices;
  if (v.size() < 3) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].allFinite()) return false;
    if (near(v[i], v[(i + 1) % v.size()])) return false;
    if (cross(v[i], v[(i + 1) % v.size()], v[(i + 2) % v.size()]) < 0.0) return false;
  }
  return signed_area(v) > 0.0;
}

}  // namespace pmatch
