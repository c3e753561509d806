#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmatch/geometry.hpp"
#include "pmatch/miner.hpp"

namespace pmatch {

inline constexpr int kNumClasses = 12;

/// Upright cylinder standing on the floor.
struct SceneObject {
  int class_id = 0;
  int instance_id = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double radius = 0.1;
  double height = 0.05;
  double canonical_angle = 0.0;  // viewing bearing at which the view perturbation vanishes
};

struct CameraSpec {
  CameraModel camera;
  double mount_height = 0.12;
  double max_range = 1.5;     // objects farther than this (horizontal) are not rendered
  double near_clip = 0.02;    // every silhouette sample must be this far in front
  double min_box_px = 4.0;
  int silhouette_samples = 64;

  /// 640x480 forward camera, 90 degree horizontal field of view, tilted 20 degrees down.
  static CameraSpec vacuum_default();
};

struct SceneSpec {
  std::string agent_id = "agent-0";
  std::string episode_id = "episode-0";
  Eigen::Vector2d room = Eigen::Vector2d(6.0, 6.0);  // [0, room.x] x [0, room.y]
  std::vector<SceneObject> objects;
  std::vector<RobotPose> trajectory;  // sampled at rate_hz
  double rate_hz = 10.0;
  CameraSpec camera = CameraSpec::vacuum_default();
  double pose_jitter = 0.0;  // stddev of reported-pose noise (m, rad)
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruthLabel {
  int instance_id = 0;
  int class_id = 0;

  bool operator==(const GroundTruthLabel&) const = default;
};

struct GroundTruth {
  std::map<ObservationKey, GroundTruthLabel> labels;
  std::map<int, SceneObject> instances;

  void merge(const GroundTruth& other);
};

struct SceneOutput {
  std::vector<Observation> observations;
  GroundTruth truth;
};

/// Renders every object whose sampled silhouette lies in front of the camera
/// and fully inside the frame; bbox = pixel AABB of the projected silhouette.
/// Throws EmptyScene when nothing is detected.
SceneOutput generate_scene(const SceneSpec& spec);

/// Defaults for randomly drawn scenes. Room sizes, object sizes and the
/// class-frequency decay are modeling assumptions.
struct SimConfig {
  double room_min = 4.0;
  double room_max = 8.0;
  int objects_min = 8;
  int objects_max = 14;
  double radius_min = 0.05;
  double radius_max = 0.3;
  double height_min = 0.02;
  double height_max = 0.07;
  double min_separation = 0.1;  // extra gap between object rims
  double class_decay = 0.8;     // P(class k) proportional to decay^k
  int trajectory_steps = 600;
  double speed = 0.25;          // m/s
  double turn_rate = 1.5;       // rad/s
  double near_object_bias = 0.75;
  double pose_jitter = 0.0;
  CameraSpec camera = CameraSpec::vacuum_default();

  void validate() const;
};

/// Random room, objects and trajectory for scene `index`.
SceneSpec random_scene_spec(const SimConfig& config, std::uint64_t seed, int index);

/// Lattice spacing at which footprints of different objects in a separated
/// scene cannot overlap: twice the orbit radius plus the farthest floor point
/// a bbox corner can project to. A bbox top edge at height h seen from
/// distance d lands at d * H / (H - h) for mount height H, and the 90 degree
/// field of view adds at most a factor sqrt(2) laterally.
double separation_spacing(const SimConfig& config);

/// Objects on a regular lattice with `spacing` meters between centers; the
/// robot orbits each object in turn.
SceneSpec separated_scene_spec(const SimConfig& config, std::uint64_t seed, int index, double spacing);

/// Two abutting objects of different classes; the robot orbits them.
SceneSpec abutting_scene_spec(std::uint64_t seed);

/// Robot driving a circular arc around `center`.
std::vector<RobotPose> arc_trajectory(const Eigen::Vector2d& center, double radius, double start_angle,
                                      double sweep, int steps, double mount_height);

/// Viewpoint-dependent feature model standing in for image pixels.
struct FeatureModel {
  int dim = 16;
  int nuisance_dim = 4;
  double class_scale = 0.5;
  double instance_sigma = 0.15;
  double nuisance_scale = 3.0;
  double noise_sigma = 0.05;
  std::uint64_t world_seed = 7;  // fixes class prototypes and the nuisance basis

  void validate() const;
  Eigen::MatrixXd class_prototypes() const;  // dim x kNumClasses
  Eigen::MatrixXd nuisance_basis() const;    // dim x nuisance_dim, orthonormal columns
};

struct InstanceLatent {
  Eigen::VectorXd latent;
  Eigen::MatrixXd nuisance_frame;  // dim x 2, orthonormal columns scaled by nuisance_scale
};

InstanceLatent instance_latent(const FeatureModel& model, const SceneObject& object, std::uint64_t seed);

/// Deterministic perturbation for a view at relative angle `relative_angle`;
/// zero at 0 and with norm 2 * nuisance_scale * |sin(relative_angle / 2)|.
Eigen::VectorXd view_perturbation(const InstanceLatent& instance, double relative_angle);

/// Bearing from the object to the camera, relative to the canonical angle.
double relative_view_angle(const SceneObject& object, const RobotPose& pose);

using FeatureMap = std::map<ObservationKey, Eigen::VectorXd>;

/// latent + view_perturbation + noise; the noise draw is keyed by instance
/// and pose, so identical poses give identical features.
FeatureMap synth_views(const FeatureModel& model, const GroundTruth& truth,
                       std::span<const Observation> observations, std::uint64_t seed);

struct ManifestScore {
  double precision = 1.0;
  double recall = 0.0;
  std::size_t mined_pairs = 0;
  std::size_t true_pairs = 0;        // mined pairs with equal instance
  std::size_t reachable_pairs = 0;   // same-instance pairs among accepted footprints
  bool zero_pairs = false;
};

/// Precision over mined pairs; recall over same-instance pairs whose
/// footprints were both accepted (same agent and episode). With no mined
/// pairs precision is reported as 1 and zero_pairs is set.
ManifestScore score_manifest(const PairManifest& manifest, const GroundTruth& truth,
                             std::span<const FloorPolygon> accepted);

}  // namespace pmatch
