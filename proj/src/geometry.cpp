#include "pmatch/geometry.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "pmatch/error.hpp"

namespace pmatch {
namespace {

void require_valid(const FloorHomography& h) {
  if (!h.valid) throw Error(ErrorCode::DegenerateHomography, "homography is not valid");
}

Eigen::Matrix3d rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

}  // namespace

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(skew))
    throw Error(ErrorCode::InvalidIntrinsics, "non-finite intrinsics");
  if (fx <= 0.0 || fy <= 0.0) throw Error(ErrorCode::InvalidIntrinsics, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidIntrinsics, "image size must be positive");
}

void CameraExtrinsics::validate() const {
  if (!rotation.allFinite() || !translation.allFinite())
    throw Error(ErrorCode::InvalidExtrinsics, "non-finite extrinsics");
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kOrthonormalTolerance) throw Error(ErrorCode::InvalidExtrinsics, "rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > kOrthonormalTolerance)
    throw Error(ErrorCode::InvalidExtrinsics, "rotation determinant is not +1");
}

CameraExtrinsics CameraExtrinsics::forward_pitched(double pitch_down, const Eigen::Vector3d& translation) {
  const double c = std::cos(pitch_down);
  const double s = std::sin(pitch_down);
  CameraExtrinsics e;
  // Rows are the camera axes expressed in the mount frame.
  e.rotation << 0.0, -1.0, 0.0,  //
      -s, 0.0, -c,               //
      c, 0.0, -s;
  e.translation = translation;
  return e;
}

double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

CameraPose camera_from_world(const CameraExtrinsics& extrinsics, const RobotPose& pose) {
  if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || !std::isfinite(pose.heading) ||
      !std::isfinite(pose.mount_height) || pose.mount_height < 0.0)
    throw Error(ErrorCode::InvalidPose, "pose must be finite with non-negative mount height");
  const Eigen::Matrix3d mount_from_world = rotation_z(normalize_angle(pose.heading)).transpose();
  const Eigen::Vector3d origin(pose.x, pose.y, pose.mount_height);
  CameraPose out;
  out.rotation = extrinsics.rotation * mount_from_world;
  out.translation = extrinsics.translation - out.rotation * origin;
  return out;
}

ProjectionMatrix build_projection_matrix(const CameraIntrinsics& intrinsics,
                                         const CameraExtrinsics& extrinsics, const RobotPose& pose) {
  intrinsics.validate();
  extrinsics.validate();
  const CameraPose cam = camera_from_world(extrinsics, pose);
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = cam.rotation;
  rt.col(3) = cam.translation;
  return intrinsics.matrix() * rt;
}

FloorHomography floor_homography(const ProjectionMatrix& projection) {
  if (!projection.allFinite()) throw Error(ErrorCode::DegenerateHomography, "non-finite projection");
  ProjectionMatrix p = projection;
  const Eigen::Matrix3d a = p.leftCols<3>();
  const double det_a = a.determinant();
  if (std::abs(det_a) <= kDeterminantEpsilon)
    throw Error(ErrorCode::DegenerateHomography, "projection has rank < 3");
  // Fix the homogeneous scale so the third row measures positive depth.
  if (det_a < 0.0) p = -p;
  const Eigen::Vector3d center = -p.leftCols<3>().partialPivLu().solve(p.col(3));
  if (center.z() <= 0.0) throw Error(ErrorCode::DegenerateHomography, "camera center is not above the floor");

  FloorHomography h;
  h.forward.col(0) = p.col(0);
  h.forward.col(1) = p.col(1);
  h.forward.col(2) = p.col(3);
  if (std::abs(h.forward.determinant()) <= kDeterminantEpsilon)
    throw Error(ErrorCode::DegenerateHomography, "floor homography is singular");
  h.inverse = h.forward.inverse();
  h.valid = true;
  return h;
}

FloorHomography floor_homography(const CameraModel& camera, const RobotPose& pose) {
  return floor_homography(build_projection_matrix(camera.intrinsics, camera.extrinsics, pose));
}

double floor_point_depth(const FloorHomography& h, const FloorPoint& point) {
  return h.forward.row(2).dot(Eigen::Vector3d(point.x, point.y, 1.0));
}

FloorPoint image_to_floor(const FloorHomography& h, const Eigen::Vector3d& homogeneous_pixel) {
  require_valid(h);
  if (!homogeneous_pixel.allFinite() || homogeneous_pixel.z() == 0.0)
    throw Error(ErrorCode::AboveHorizon, "pixel is not a finite homogeneous point");
  const Eigen::Vector3d pixel = homogeneous_pixel / homogeneous_pixel.z();
  const Eigen::Vector3d f = h.inverse * pixel;
  if (std::abs(f.z()) <= kHomogeneousEpsilon)
    throw Error(ErrorCode::AboveHorizon, "ray is parallel to the floor");
  const FloorPoint out{f.x() / f.z(), f.y() / f.z()};
  if (!(floor_point_depth(h, out) > 0.0))
    throw Error(ErrorCode::AboveHorizon, "ray meets the floor behind the camera");
  return out;
}

FloorPoint image_to_floor(const FloorHomography& h, const PixelPoint& pixel) {
  return image_to_floor(h, Eigen::Vector3d(pixel.u, pixel.v, 1.0));
}

PixelPoint floor_to_image(const FloorHomography& h, const FloorPoint& point) {
  require_valid(h);
  const Eigen::Vector3d x = h.forward * Eigen::Vector3d(point.x, point.y, 1.0);
  if (!(x.z() > 0.0)) throw Error(ErrorCode::BehindCamera, "floor point is behind the camera");
  return {x.x() / x.z(), x.y() / x.z()};
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::AboveHorizon: return "AboveHorizon";
    case RejectReason::TooFar: return "TooFar";
    case RejectReason::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

FootprintResult project_bbox_footprint(const FloorHomography& h, const PixelBox& bbox, const RobotPose& pose,
                                       double max_depth, const PolygonSource& source) {
  if (!std::isfinite(bbox.xmin) || !std::isfinite(bbox.ymin) || !std::isfinite(bbox.xmax) ||
      !std::isfinite(bbox.ymax) || !(bbox.width() > 0.0) || !(bbox.height() > 0.0))
    throw Error(ErrorCode::InvalidBBox, "bbox needs positive width and height");
  require_valid(h);

  const std::array<PixelPoint, 4> corners{PixelPoint{bbox.xmin, bbox.ymin}, PixelPoint{bbox.xmax, bbox.ymin},
                                          PixelPoint{bbox.xmax, bbox.ymax}, PixelPoint{bbox.xmin, bbox.ymax}};
  std::array<Eigen::Vector2d, 4> floor;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    try {
      const FloorPoint f = image_to_floor(h, corners[i]);
      floor[i] = {f.x, f.y};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::AboveHorizon) return RejectReason::AboveHorizon;
      throw;
    }
  }

  FloorPolygon polygon;
  try {
    polygon = convex_hull(floor);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CollinearInput) return RejectReason::Degenerate;
    throw;
  }
  if (area(polygon) < kAreaEpsilon) return RejectReason::Degenerate;
  if (distance_to(polygon, pose.position()) > max_depth) return RejectReason::TooFar;
  polygon.source = source;
  return polygon;
}

}  // namespace pmatch
