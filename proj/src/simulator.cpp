#include "pmatch/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <Eigen/QR>

#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

constexpr double kPi = std::numbers::pi;

std::string frame_id(const std::string& episode, std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-f%05zu", frame);
  return episode + buf;
}

Eigen::MatrixXd random_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

Eigen::MatrixXd orthonormal_columns(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::MatrixXd a = random_normal(rng, rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

std::uint64_t pose_hash(const RobotPose& pose) {
  std::uint64_t h = std::bit_cast<std::uint64_t>(pose.x);
  h = mix_seed(h, std::bit_cast<std::uint64_t>(pose.y));
  return mix_seed(h, std::bit_cast<std::uint64_t>(pose.heading));
}

int draw_class(Rng& rng, double decay) {
  std::vector<double> weights(kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) weights[k] = std::pow(decay, k);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  return pick(rng);
}

// Drives toward waypoints, biased to stop near objects so each one is seen
// from several bearings.
std::vector<RobotPose> waypoint_trajectory(const SimConfig& config, const Eigen::Vector2d& room,
                                           const std::vector<SceneObject>& objects, Rng& rng) {
  constexpr double margin = 0.1;
  const double dt = 0.1;
  std::uniform_real_distribution<double> ux(margin, room.x() - margin);
  std::uniform_real_distribution<double> uy(margin, room.y() - margin);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  auto clamp_room = [&](Eigen::Vector2d p) {
    p.x() = std::clamp(p.x(), margin, room.x() - margin);
    p.y() = std::clamp(p.y(), margin, room.y() - margin);
    return p;
  };
  auto next_waypoint = [&]() -> Eigen::Vector2d {
    if (!objects.empty() && unit(rng) < config.near_object_bias) {
      std::uniform_int_distribution<std::size_t> pick(0, objects.size() - 1);
      const SceneObject& o = objects[pick(rng)];
      const double r = o.radius + 0.25 + 0.65 * unit(rng);
      const double a = angle(rng);
      return clamp_room(o.position + r * Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
    return {ux(rng), uy(rng)};
  };

  std::vector<RobotPose> poses;
  poses.reserve(config.trajectory_steps);
  Eigen::Vector2d p(ux(rng), uy(rng));
  double heading = angle(rng);
  Eigen::Vector2d target = next_waypoint();
  int since_waypoint = 0;
  for (int step = 0; step < config.trajectory_steps; ++step) {
    poses.push_back({p.x(), p.y(), normalize_angle(heading), config.camera.mount_height});
    const Eigen::Vector2d d = target - p;
    if (d.norm() < 0.08 || since_waypoint > 250) {
      target = next_waypoint();
      since_waypoint = 0;
      continue;
    }
    ++since_waypoint;
    const double err = normalize_angle(std::atan2(d.y(), d.x()) - heading);
    const double max_turn = config.turn_rate * dt;
    heading = normalize_angle(heading + std::clamp(err, -max_turn, max_turn));
    if (std::abs(err) < 0.5) {
      const double stride = std::min(config.speed * dt, d.norm());
      p = clamp_room(p + stride * Eigen::Vector2d(std::cos(heading), std::sin(heading)));
    }
  }
  return poses;
}

}  // namespace

CameraSpec CameraSpec::vacuum_default() {
  CameraSpec spec;
  spec.camera.intrinsics = CameraIntrinsics{320.0, 320.0, 320.0, 240.0, 0.0, 640, 480};
  spec.camera.extrinsics = CameraExtrinsics::forward_pitched(20.0 * kPi / 180.0);
  return spec;
}

void SceneSpec::validate() const {
  if (!(room.x() > 0.0 && room.y() > 0.0)) throw Error(ErrorCode::ConfigError, "room extents must be positive");
  if (agent_id.empty() || episode_id.empty()) throw Error(ErrorCode::ConfigError, "scene ids must be non-empty");
  if (!(rate_hz > 0.0)) throw Error(ErrorCode::ConfigError, "rate must be positive");
  camera.camera.intrinsics.validate();
  camera.camera.extrinsics.validate();
  if (!(camera.mount_height > 0.0)) throw Error(ErrorCode::ConfigError, "camera height must be positive");
  if (camera.silhouette_samples < 8) throw Error(ErrorCode::ConfigError, "need at least 8 silhouette samples");
  for (const auto& o : objects) {
    if (o.class_id < 0 || o.class_id >= kNumClasses) throw Error(ErrorCode::ConfigError, "class id out of range");
    if (!(o.radius > 0.0 && o.height > 0.0)) throw Error(ErrorCode::ConfigError, "object size must be positive");
    if (o.position.x() < 0.0 || o.position.y() < 0.0 || o.position.x() > room.x() || o.position.y() > room.y())
      throw Error(ErrorCode::ConfigError, "object outside room");
  }
  for (const auto& p : trajectory) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > room.x() || p.y > room.y())
      throw Error(ErrorCode::ConfigError, "trajectory leaves the room");
  }
}

void GroundTruth::merge(const GroundTruth& other) {
  for (const auto& [key, label] : other.labels) {
    if (!labels.emplace(key, label).second)
      throw Error(ErrorCode::DuplicateKey, "duplicate ground-truth key " + key.image_id + "/" + key.box_id);
  }
  for (const auto& [id, object] : other.instances) instances.emplace(id, object);
}

SceneOutput generate_scene(const SceneSpec& spec) {
  spec.validate();
  const CameraSpec& cs = spec.camera;
  const auto& k = cs.camera.intrinsics;
  const Eigen::Matrix3d kmat = k.matrix();
  Rng jitter_rng(mix_seed(spec.seed, 0x6a177e5ULL));
  std::normal_distribution<double> jitter(0.0, 1.0);

  SceneOutput out;
  for (const auto& o : spec.objects) out.truth.instances[o.instance_id] = o;

  const int samples = cs.silhouette_samples;
  for (std::size_t frame = 0; frame < spec.trajectory.size(); ++frame) {
    RobotPose pose = spec.trajectory[frame];
    pose.mount_height = cs.mount_height;
    const CameraPose cam = camera_from_world(cs.camera.extrinsics, pose);
    const Eigen::Vector3d center = cam.center();
    const std::string image_id = frame_id(spec.episode_id, frame);
    int box_index = 0;
    for (const auto& o : spec.objects) {
      if ((o.position - center.head<2>()).norm() > cs.max_range) continue;
      double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
      bool visible = true;
      for (int s = 0; s < samples && visible; ++s) {
        const double a = 2.0 * kPi * s / samples;
        const Eigen::Vector2d rim = o.position + o.radius * Eigen::Vector2d(std::cos(a), std::sin(a));
        for (double z : {0.0, o.height}) {
          const Eigen::Vector3d pc = cam.rotation * Eigen::Vector3d(rim.x(), rim.y(), z) + cam.translation;
          if (pc.z() <= cs.near_clip) {
            visible = false;
            break;
          }
          const Eigen::Vector3d px = kmat * pc;
          const double u = px.x() / px.z();
          const double v = px.y() / px.z();
          umin = std::min(umin, u);
          umax = std::max(umax, u);
          vmin = std::min(vmin, v);
          vmax = std::max(vmax, v);
        }
      }
      if (!visible) continue;
      if (umin < 0.0 || vmin < 0.0 || umax > k.width || vmax > k.height) continue;
      if (umax - umin < cs.min_box_px || vmax - vmin < cs.min_box_px) continue;

      Observation obs;
      obs.agent_id = spec.agent_id;
      obs.episode_id = spec.episode_id;
      obs.image_id = image_id;
      obs.box_id = "b" + std::to_string(box_index++);
      obs.bbox = {umin, vmin, umax, vmax};
      obs.pose = pose;
      if (spec.pose_jitter > 0.0) {
        obs.pose.x += spec.pose_jitter * jitter(jitter_rng);
        obs.pose.y += spec.pose_jitter * jitter(jitter_rng);
        obs.pose.heading = normalize_angle(obs.pose.heading + spec.pose_jitter * jitter(jitter_rng));
      }
      obs.camera = cs.camera;
      obs.timestamp = static_cast<double>(frame) / spec.rate_hz;
      out.truth.labels[obs.key()] = {o.instance_id, o.class_id};
      out.observations.push_back(std::move(obs));
    }
  }
  if (out.observations.empty()) throw Error(ErrorCode::EmptyScene, "scene " + spec.episode_id + " has no detections");
  return out;
}

void SimConfig::validate() const {
  if (!(room_min > 0.0 && room_max >= room_min)) throw Error(ErrorCode::ConfigError, "bad room range");
  if (!(objects_min >= 1 && objects_max >= objects_min)) throw Error(ErrorCode::ConfigError, "bad object count range");
  if (!(radius_min > 0.0 && radius_max >= radius_min)) throw Error(ErrorCode::ConfigError, "bad radius range");
  if (!(height_min > 0.0 && height_max >= height_min)) throw Error(ErrorCode::ConfigError, "bad height range");
  if (!(height_max < camera.mount_height))
    throw Error(ErrorCode::ConfigError, "objects must be lower than the camera");
  if (!(class_decay > 0.0 && class_decay <= 1.0)) throw Error(ErrorCode::ConfigError, "class_decay must be in (0, 1]");
  if (trajectory_steps < 1) throw Error(ErrorCode::ConfigError, "trajectory_steps must be positive");
  if (!(speed > 0.0 && turn_rate > 0.0)) throw Error(ErrorCode::ConfigError, "speed and turn rate must be positive");
  if (!(pose_jitter >= 0.0)) throw Error(ErrorCode::ConfigError, "pose_jitter must be non-negative");
}

SceneSpec random_scene_spec(const SimConfig& config, std::uint64_t seed, int index) {
  config.validate();
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneSpec spec;
  spec.agent_id = "agent-" + std::to_string(index);
  spec.episode_id = "ep" + std::to_string(index);
  spec.room = {config.room_min + (config.room_max - config.room_min) * unit(rng),
               config.room_min + (config.room_max - config.room_min) * unit(rng)};
  spec.camera = config.camera;
  spec.pose_jitter = config.pose_jitter;
  spec.seed = mix_seed(seed, 0x5ce9e000ULL + static_cast<std::uint64_t>(index));

  std::uniform_int_distribution<int> count(config.objects_min, config.objects_max);
  const int wanted = count(rng);
  for (int attempt = 0; attempt < 2000 && static_cast<int>(spec.objects.size()) < wanted; ++attempt) {
    SceneObject o;
    o.radius = config.radius_min + (config.radius_max - config.radius_min) * unit(rng);
    o.height = config.height_min + (config.height_max - config.height_min) * unit(rng);
    const double m = o.radius + 0.1;
    o.position = {m + (spec.room.x() - 2 * m) * unit(rng), m + (spec.room.y() - 2 * m) * unit(rng)};
    const bool clear = std::all_of(spec.objects.begin(), spec.objects.end(), [&](const SceneObject& other) {
      return (other.position - o.position).norm() > o.radius + other.radius + config.min_separation;
    });
    if (!clear) continue;
    // The first object cycles through classes so every class occurs across scenes.
    o.class_id = spec.objects.empty() ? index % kNumClasses : draw_class(rng, config.class_decay);
    o.instance_id = index * 1000 + static_cast<int>(spec.objects.size());
    o.canonical_angle = 2.0 * kPi * unit(rng) - kPi;
    spec.objects.push_back(o);
  }
  spec.trajectory = waypoint_trajectory(config, spec.room, spec.objects, rng);
  return spec;
}

namespace {
constexpr double kOrbitClearance = 0.35;  // orbit radius beyond the object rim
}

double separation_spacing(const SimConfig& config) {
  config.validate();
  const double height = config.camera.mount_height;
  if (!(height > config.height_max)) throw Error(ErrorCode::ConfigError, "objects must be lower than the camera");
  const double orbit = config.radius_max + kOrbitClearance;
  const double reach = (orbit + config.radius_max) * height / (height - config.height_max) * std::sqrt(2.0);
  return 2.0 * (orbit + reach);
}

SceneSpec separated_scene_spec(const SimConfig& config, std::uint64_t seed, int index, double spacing) {
  config.validate();
  Rng rng(mix_seed(seed, 0x5e9a0000ULL + static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SceneSpec spec;
  spec.agent_id = "agent-sep" + std::to_string(index);
  spec.episode_id = "sep" + std::to_string(index);
  constexpr int side = 3;
  spec.room = Eigen::Vector2d::Constant(spacing * (side + 1));
  spec.camera = config.camera;
  spec.seed = mix_seed(seed, 0x5e9a5eedULL + static_cast<std::uint64_t>(index));
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      SceneObject o;
      o.radius = config.radius_min + (config.radius_max - config.radius_min) * unit(rng);
      o.height = config.height_min + (config.height_max - config.height_min) * unit(rng);
      o.position = {spacing * (i + 1), spacing * (j + 1)};
      o.class_id = draw_class(rng, config.class_decay);
      o.instance_id = 500000 + index * 1000 + i * side + j;
      o.canonical_angle = 2.0 * kPi * unit(rng) - kPi;
      spec.objects.push_back(o);
    }
  }
  for (const auto& o : spec.objects) {
    const double start = 2.0 * kPi * unit(rng);
    const auto arc = arc_trajectory(o.position, o.radius + kOrbitClearance, start, 1.5 * kPi, 40, config.camera.mount_height);
    spec.trajectory.insert(spec.trajectory.end(), arc.begin(), arc.end());
  }
  return spec;
}

SceneSpec abutting_scene_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.agent_id = "agent-abut";
  spec.episode_id = "abut";
  spec.room = {4.0, 4.0};
  spec.seed = seed;
  SceneObject a;
  a.class_id = 0;
  a.instance_id = 900001;
  a.radius = 0.1;
  a.height = 0.05;
  a.position = {1.9, 2.0};
  SceneObject b = a;
  b.class_id = 5;
  b.instance_id = 900002;
  b.radius = 0.1;
  b.height = 0.04;
  b.position = {2.1, 2.0};
  b.canonical_angle = 1.0;
  spec.objects = {a, b};
  const double h = spec.camera.mount_height;
  for (double r : {0.45, 0.6, 0.75, 0.9}) {
    const auto arc = arc_trajectory({2.0, 2.0}, r, 0.3 * r, 2.0 * kPi, 48, h);
    spec.trajectory.insert(spec.trajectory.end(), arc.begin(), arc.end());
  }
  return spec;
}

std::vector<RobotPose> arc_trajectory(const Eigen::Vector2d& center, double radius, double start_angle,
                                      double sweep, int steps, double mount_height) {
  std::vector<RobotPose> poses;
  poses.reserve(steps);
  for (int i = 0; i < steps; ++i) {
    const double a = start_angle + (steps > 1 ? sweep * i / (steps - 1) : 0.0);
    const Eigen::Vector2d p = center + radius * Eigen::Vector2d(std::cos(a), std::sin(a));
    poses.push_back({p.x(), p.y(), normalize_angle(a + kPi), mount_height});
  }
  return poses;
}

void FeatureModel::validate() const {
  if (dim < 2 || nuisance_dim < 2 || nuisance_dim > dim)
    throw Error(ErrorCode::ConfigError, "feature dims must satisfy 2 <= nuisance_dim <= dim");
  if (!(class_scale > 0.0 && instance_sigma >= 0.0 && nuisance_scale >= 0.0 && noise_sigma >= 0.0))
    throw Error(ErrorCode::ConfigError, "feature scales must be non-negative");
}

Eigen::MatrixXd FeatureModel::class_prototypes() const {
  Rng rng(mix_seed(world_seed, 0xc1a55ULL));
  return class_scale * random_normal(rng, dim, kNumClasses);
}

Eigen::MatrixXd FeatureModel::nuisance_basis() const {
  Rng rng(mix_seed(world_seed, 0x9015eULL));
  return orthonormal_columns(rng, dim, nuisance_dim);
}

InstanceLatent instance_latent(const FeatureModel& model, const SceneObject& object, std::uint64_t seed) {
  model.validate();
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(object.instance_id)));
  InstanceLatent out;
  out.latent = model.class_prototypes().col(object.class_id) + model.instance_sigma * random_normal(rng, model.dim, 1);
  out.nuisance_frame = model.nuisance_scale * model.nuisance_basis() * orthonormal_columns(rng, model.nuisance_dim, 2);
  return out;
}

Eigen::VectorXd view_perturbation(const InstanceLatent& instance, double relative_angle) {
  return instance.nuisance_frame * Eigen::Vector2d(std::cos(relative_angle) - 1.0, std::sin(relative_angle));
}

double relative_view_angle(const SceneObject& object, const RobotPose& pose) {
  const double bearing = std::atan2(pose.y - object.position.y(), pose.x - object.position.x());
  return normalize_angle(bearing - object.canonical_angle);
}

FeatureMap synth_views(const FeatureModel& model, const GroundTruth& truth,
                       std::span<const Observation> observations, std::uint64_t seed) {
  model.validate();
  std::map<int, InstanceLatent> cache;
  FeatureMap out;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& obs : observations) {
    const auto label_it = truth.labels.find(obs.key());
    if (label_it == truth.labels.end())
      throw Error(ErrorCode::UnknownQuery, "no ground truth for " + obs.image_id + "/" + obs.box_id);
    const int instance = label_it->second.instance_id;
    const SceneObject& object = truth.instances.at(instance);
    auto it = cache.find(instance);
    if (it == cache.end()) it = cache.emplace(instance, instance_latent(model, object, seed)).first;

    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(instance)), pose_hash(obs.pose)));
    Eigen::VectorXd v = it->second.latent + view_perturbation(it->second, relative_view_angle(object, obs.pose));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += model.noise_sigma * noise(rng);
    out[obs.key()] = std::move(v);
  }
  return out;
}

ManifestScore score_manifest(const PairManifest& manifest, const GroundTruth& truth,
                             std::span<const FloorPolygon> accepted) {
  auto instance_of = [&](const ObservationKey& key) {
    const auto it = truth.labels.find(key);
    if (it == truth.labels.end())
      throw Error(ErrorCode::UnknownQuery, "no ground truth for " + key.image_id + "/" + key.box_id);
    return it->second.instance_id;
  };

  ManifestScore score;
  for (const auto& [query, list] : manifest.entries) {
    for (const auto& c : list) {
      if (!(query < c.key)) continue;
      ++score.mined_pairs;
      if (instance_of(query) == instance_of(c.key)) ++score.true_pairs;
    }
  }

  std::map<std::pair<std::string, std::string>, std::map<int, std::size_t>> per_group;
  for (const auto& f : accepted) {
    ++per_group[{f.source.agent_id, f.source.episode_id}][instance_of({f.source.image_id, f.source.box_id})];
  }
  for (const auto& [group, counts] : per_group)
    for (const auto& [instance, n] : counts) score.reachable_pairs += n * (n - 1) / 2;

  score.zero_pairs = score.mined_pairs == 0;
  score.precision = score.zero_pairs ? 1.0 : static_cast<double>(score.true_pairs) / score.mined_pairs;
  score.recall = score.reachable_pairs == 0 ? 0.0 : static_cast<double>(score.true_pairs) / score.reachable_pairs;
  return score;
}

}  // namespace pmatch
