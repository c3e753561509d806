#include "pmatch/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string color_for(std::uint64_t id) {
  const std::uint64_t h = mix_seed(id, 0xc0105ULL);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<unsigned>(64 + (h & 0x7f)),
                static_cast<unsigned>(64 + ((h >> 8) & 0x7f)), static_cast<unsigned>(64 + ((h >> 16) & 0x7f)));
  return buf;
}

Eigen::Vector2d centroid(const FloorPolygon& p) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& v : p.vertices) c += v;
  return p.vertices.empty() ? c : Eigen::Vector2d(c / static_cast<double>(p.vertices.size()));
}

}  // namespace

std::string render_svg(std::span<const Observation> observations, std::span<const FloorPolygon> footprints,
                       const PairManifest* manifest, const GroundTruth* truth, const SvgOptions& options) {
  std::map<ObservationKey, const FloorPolygon*> drawn;
  for (const auto& fp : footprints) {
    const ObservationKey key{fp.source.image_id, fp.source.box_id};
    if (manifest) {
      const auto it = manifest->entries.find(key);
      if (it == manifest->entries.end() || it->second.empty()) continue;
    }
    drawn.emplace(key, &fp);
  }

  // Trajectories: unique consecutive poses per episode, in timestamp order.
  std::map<std::string, std::vector<std::pair<double, Eigen::Vector2d>>> tracks;
  for (const auto& obs : observations)
    tracks[obs.agent_id + "/" + obs.episode_id].emplace_back(obs.timestamp, obs.pose.position());
  for (auto& [name, pts] : tracks) {
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    pts.erase(std::unique(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
              pts.end());
  }

  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  auto extend = [&](const Eigen::Vector2d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& [name, pts] : tracks)
    for (const auto& [t, p] : pts) extend(p);
  for (const auto& [key, fp] : drawn)
    for (const auto& v : fp->vertices) extend(v);
  if (!std::isfinite(lo.x())) lo = hi = Eigen::Vector2d::Zero();
  lo.array() -= options.margin_m;
  hi.array() += options.margin_m;

  const double s = options.pixels_per_meter;
  auto px = [&](const Eigen::Vector2d& p) { return fmt((p.x() - lo.x()) * s) + "," + fmt((hi.y() - p.y()) * s); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt((hi.x() - lo.x()) * s) << "\" height=\""
     << fmt((hi.y() - lo.y()) * s) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& [name, pts] : tracks) {
    os << "<polyline class=\"trajectory\" data-episode=\"" << name << "\" fill=\"none\" stroke=\"#888\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << px(pts[i].second);
    os << "\"/>\n";
  }
  for (const auto& [key, fp] : drawn) {
    std::string fill = "#4a90d9";
    if (truth) {
      const auto it = truth->labels.find(key);
      if (it != truth->labels.end()) fill = color_for(static_cast<std::uint64_t>(it->second.instance_id));
    }
    os << "<polygon class=\"footprint\" data-key=\"" << key.image_id << "/" << key.box_id << "\" fill=\"" << fill
       << "\" fill-opacity=\"0.3\" stroke=\"" << fill << "\" points=\"";
    for (std::size_t i = 0; i < fp->vertices.size(); ++i) os << (i ? " " : "") << px(fp->vertices[i]);
    os << "\"/>\n";
  }
  if (manifest) {
    for (const auto& [key, cands] : manifest->entries) {
      const auto a = drawn.find(key);
      if (a == drawn.end()) continue;
      for (const auto& c : cands) {
        if (!(key < c.key)) continue;
        const auto b = drawn.find(c.key);
        if (b == drawn.end()) continue;
        const Eigen::Vector2d p = centroid(*a->second), q = centroid(*b->second);
        const auto pa = px(p), pb = px(q);
        os << "<line class=\"match\" x1=\"" << pa.substr(0, pa.find(',')) << "\" y1=\"" << pa.substr(pa.find(',') + 1)
           << "\" x2=\"" << pb.substr(0, pb.find(',')) << "\" y2=\"" << pb.substr(pb.find(',') + 1)
           << "\" stroke=\"#d0021b\" stroke-width=\"1\"/>\n";
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pmatch
