#pragma once

#include <variant>

#include <Eigen/Core>

#include "pmatch/polygon.hpp"

namespace pmatch {

// World frame: right-handed, z up, floor at z = 0.
// Camera frame: +z forward, +x right, +y down.
// Mount frame: origin above the robot center, +x forward, +y left, +z up.

inline constexpr double kHomogeneousEpsilon = 1e-8;
inline constexpr double kDeterminantEpsilon = 1e-12;
inline constexpr double kOrthonormalTolerance = 1e-9;
inline constexpr double kDefaultMaxDepth = 0.7;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;
  int width = 640;
  int height = 480;

  Eigen::Matrix3d matrix() const;
  void validate() const;
};

/// Rigid transform mount frame -> camera frame: p_cam = rotation * p_mount + translation.
struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const;

  /// Forward-facing camera tilted `pitch_down` radians below the horizontal.
  static CameraExtrinsics forward_pitched(double pitch_down,
                                          const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());
};

struct CameraModel {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

struct RobotPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;       // radians, counterclockwise from world +x
  double mount_height = 0.0;  // mount origin above the floor, meters

  Eigen::Vector2d position() const { return {x, y}; }
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

struct FloorPoint {
  double x = 0.0;
  double y = 0.0;
};

struct PixelBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

using ProjectionMatrix = Eigen::Matrix<double, 3, 4>;

/// World -> camera rigid transform for a camera riding on a planar robot.
struct CameraPose {
  Eigen::Matrix3d rotation;     // camera <- world
  Eigen::Vector3d translation;  // camera <- world
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
};

CameraPose camera_from_world(const CameraExtrinsics& extrinsics, const RobotPose& pose);

/// P = K [R_wc | t_wc]. Throws InvalidExtrinsics / InvalidIntrinsics / InvalidPose.
ProjectionMatrix build_projection_matrix(const CameraIntrinsics& intrinsics,
                                         const CameraExtrinsics& extrinsics, const RobotPose& pose);

/// Floor <-> image homography. `forward` = P * M with M embedding (x, y, 1)
/// as (x, y, 0, 1); `inverse` maps homogeneous pixels to homogeneous floor points.
struct FloorHomography {
  Eigen::Matrix3d forward = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d inverse = Eigen::Matrix3d::Identity();
  bool valid = false;
};

/// Throws DegenerateHomography when |det(P M)| <= kDeterminantEpsilon or the
/// camera center is not above the floor.
FloorHomography floor_homography(const ProjectionMatrix& projection);

/// Convenience: projection + homography for a camera model at a pose.
FloorHomography floor_homography(const CameraModel& camera, const RobotPose& pose);

/// Throws AboveHorizon when the back-projected ray misses the floor in front
/// of the camera.
FloorPoint image_to_floor(const FloorHomography& h, const PixelPoint& pixel);
FloorPoint image_to_floor(const FloorHomography& h, const Eigen::Vector3d& homogeneous_pixel);

/// Throws BehindCamera when the floor point has non-positive camera depth.
PixelPoint floor_to_image(const FloorHomography& h, const FloorPoint& point);

/// Camera-frame depth of a floor point (positive in front of the camera).
double floor_point_depth(const FloorHomography& h, const FloorPoint& point);

enum class RejectReason { AboveHorizon, TooFar, Degenerate };

const char* to_string(RejectReason reason);

using FootprintResult = std::variant<FloorPolygon, RejectReason>;

/// Projects the four bbox corners to the floor and returns their convex hull.
/// Rejected when a corner is above the horizon, when the hull is degenerate,
/// or when the footprint's distance from the robot center exceeds max_depth.
/// Throws InvalidBBox for non-positive width or height.
FootprintResult project_bbox_footprint(const FloorHomography& h, const PixelBox& bbox,
                                       const RobotPose& pose, double max_depth = kDefaultMaxDepth,
                                       const PolygonSource& source = {});

}  // namespace pmatch
