#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pmatch/error.hpp"
#include "pmatch/geometry.hpp"

using namespace pmatch;

namespace {

// Camera looking straight down; image x along world -y, image y along world -x.
CameraExtrinsics down_camera() {
  CameraExtrinsics e;
  e.rotation << 0, -1, 0, -1, 0, 0, 0, 0, -1;
  return e;
}

CameraIntrinsics unit_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 1.0;
  k.cx = k.cy = 0.0;
  return k;
}

CameraIntrinsics vacuum_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 320.0;
  k.cx = 320.0;
  k.cy = 240.0;
  return k;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("identity intrinsics and extrinsics give P = [I | 0]") {
  const RobotPose pose{0.0, 0.0, 0.0, 0.0};
  const ProjectionMatrix p = build_projection_matrix(unit_intrinsics(), CameraExtrinsics{}, pose);
  ProjectionMatrix expected = ProjectionMatrix::Zero();
  expected.leftCols<3>().setIdentity();
  CHECK((p - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("translate-only extrinsics put the world origin on the principal axis") {
  CameraExtrinsics e;
  e.translation = {0.0, 0.0, 1.0};
  const ProjectionMatrix p = build_projection_matrix(unit_intrinsics(), e, RobotPose{});
  const Eigen::Vector3d img = p * Eigen::Vector4d(0, 0, 0, 1);
  CHECK(img.x() / img.z() == 0.0);
  CHECK(img.y() / img.z() == 0.0);
}

TEST_CASE("projection matrix equals the explicit two-step transform") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    CameraIntrinsics k;
    k.fx = 200 + 300 * std::abs(u(rng));
    k.fy = 200 + 300 * std::abs(u(rng));
    k.cx = 320 + 20 * u(rng);
    k.cy = 240 + 20 * u(rng);
    k.skew = 0.5 * u(rng);
    CameraExtrinsics e;
    e.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized().toRotationMatrix();
    e.translation = {u(rng), u(rng), u(rng)};
    const RobotPose pose{3 * u(rng), 3 * u(rng), M_PI * u(rng), 0.5 + 0.4 * u(rng)};
    const ProjectionMatrix p = build_projection_matrix(k, e, pose);
    const oracle::Camera cam = oracle::make_camera(k, e, pose);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector3d x(5 * u(rng), 5 * u(rng), 5 * u(rng));
      const Eigen::Vector3d direct = p * x.homogeneous();
      const Eigen::Vector3d two_step = cam.K * (cam.R * x + cam.t);
      worst = std::max(worst, (direct - two_step).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("non-orthonormal rotation is rejected") {
  CameraExtrinsics e;
  e.rotation(0, 0) = 1.01;
  CHECK(code_of([&] { build_projection_matrix(unit_intrinsics(), e, RobotPose{}); }) ==
        ErrorCode::InvalidExtrinsics);
  e.rotation = -Eigen::Matrix3d::Identity();  // orthogonal but a reflection
  CHECK(code_of([&] { e.validate(); }) == ErrorCode::InvalidExtrinsics);
  CameraIntrinsics k = unit_intrinsics();
  k.fx = 0.0;
  CHECK(code_of([&] { k.validate(); }) == ErrorCode::InvalidIntrinsics);
}

TEST_CASE("downward camera maps floor points by a signed axis swap") {
  const RobotPose pose{0.0, 0.0, 0.0, 1.0};
  const FloorHomography h = floor_homography(build_projection_matrix(unit_intrinsics(), down_camera(), pose));
  REQUIRE(h.valid);
  const PixelPoint px = floor_to_image(h, {0.3, -0.2});
  CHECK(px.u == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(px.v == doctest::Approx(-0.3).epsilon(1e-12));

  const FloorPoint below = image_to_floor(h, PixelPoint{0.0, 0.0});
  CHECK(std::abs(below.x) < 1e-12);
  CHECK(std::abs(below.y) < 1e-12);

  const oracle::Camera cam = oracle::make_camera(unit_intrinsics(), down_camera(), pose);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double pu = u(rng), pv = u(rng);
    const FloorPoint f = image_to_floor(h, PixelPoint{pu, pv});
    const auto ref = oracle::ray_floor(cam, pu, pv);
    REQUIRE(ref);
    CHECK(std::abs(f.x - ref->x()) < 1e-12);
    CHECK(std::abs(f.y - ref->y()) < 1e-12);
    const PixelPoint back = floor_to_image(h, f);
    CHECK(std::abs(back.u - pu) < 1e-12);
    CHECK(std::abs(back.v - pv) < 1e-12);
  }
}

TEST_CASE("forward times inverse is the identity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pitch(0.1, 1.4), head(-M_PI, M_PI), height(0.05, 2.0);
  for (int i = 0; i < 200; ++i) {
    const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(pitch(rng))};
    const FloorHomography h = floor_homography(cam, RobotPose{1.0, -2.0, head(rng), height(rng)});
    CHECK((h.forward * h.inverse - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("45 degree camera sees its optical axis 1 m ahead at 1 m height") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(M_PI / 4)};
  const RobotPose pose{0.5, 0.25, 0.0, 1.0};
  const FloorHomography h = floor_homography(cam, pose);
  const FloorPoint f = image_to_floor(h, PixelPoint{320.0, 240.0});
  CHECK(std::hypot(f.x - pose.x, f.y - pose.y) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(f.x - 1.5) < 1e-9);
  CHECK(std::abs(f.y - 0.25) < 1e-9);
  const PixelPoint back = floor_to_image(h, f);
  CHECK(std::abs(back.u - 320.0) < 1e-9);
  CHECK(std::abs(back.v - 240.0) < 1e-9);
}

TEST_CASE("level camera: horizon row never meets the floor") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(0.0)};
  const FloorHomography h = floor_homography(cam, RobotPose{0, 0, 0, 0.12});
  CHECK(code_of([&] { image_to_floor(h, PixelPoint{100.0, 240.0}); }) == ErrorCode::AboveHorizon);
  CHECK(code_of([&] { image_to_floor(h, PixelPoint{100.0, 100.0}); }) == ErrorCode::AboveHorizon);
  CHECK_NOTHROW(image_to_floor(h, PixelPoint{100.0, 400.0}));
}

TEST_CASE("camera on the floor has no usable homography and below it is an invalid pose") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(0.3)};
  CHECK(code_of([&] { floor_homography(cam, RobotPose{0, 0, 0, 0.0}); }) == ErrorCode::DegenerateHomography);
  CHECK(code_of([&] { floor_homography(cam, RobotPose{0, 0, 0, -0.5}); }) == ErrorCode::InvalidPose);
}

TEST_CASE("floor points behind the camera are rejected") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(0.3)};
  const FloorHomography h = floor_homography(cam, RobotPose{0, 0, 0, 0.12});
  CHECK(code_of([&] { floor_to_image(h, FloorPoint{-1.0, 0.0}); }) == ErrorCode::BehindCamera);
  CHECK(floor_point_depth(h, FloorPoint{1.0, 0.0}) > 0.0);
}

TEST_CASE("random pixels round-trip through the floor") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pitch(0.15, 1.2), head(-M_PI, M_PI), height(0.05, 1.5);
  std::uniform_real_distribution<double> pu(0.0, 640.0), pv(0.0, 480.0);
  int checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(pitch(rng))};
    const FloorHomography h = floor_homography(cam, RobotPose{0.3, 0.7, head(rng), height(rng)});
    const PixelPoint p{pu(rng), pv(rng)};
    try {
      const PixelPoint back = floor_to_image(h, image_to_floor(h, p));
      worst = std::max({worst, std::abs(back.u - p.u), std::abs(back.v - p.v)});
      ++checked;
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::AboveHorizon);
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("homogeneous pixel scale does not change the floor point") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(0.4)};
  const FloorHomography h = floor_homography(cam, RobotPose{1, 1, 0.7, 0.12});
  const Eigen::Vector3d x(250.0, 400.0, 1.0);
  const FloorPoint base = image_to_floor(h, x);
  for (double lambda : {0.5, 2.0}) {
    const FloorPoint f = image_to_floor(h, Eigen::Vector3d(lambda * x));
    CHECK(f.x == base.x);
    CHECK(f.y == base.y);
  }
  // -3 is not a power of two, so dehomogenization can differ in the last bit.
  const FloorPoint f = image_to_floor(h, Eigen::Vector3d(-3.0 * x));
  CHECK(std::abs(f.x - base.x) < 1e-12);
  CHECK(std::abs(f.y - base.y) < 1e-12);
}

TEST_CASE("downward footprint area scales bbox area by (height / f)^2") {
  CameraIntrinsics k = vacuum_intrinsics();
  k.fx = k.fy = 400.0;
  const double height = 0.8;
  const RobotPose pose{2.0, 3.0, 0.9, height};
  const FloorHomography h = floor_homography(CameraModel{k, down_camera()}, pose);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(0.0, 640.0), uy(0.0, 480.0);
  for (int i = 0; i < 100; ++i) {
    double x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    if (std::abs(x1 - x0) < 1.0 || std::abs(y1 - y0) < 1.0) continue;
    const PixelBox box{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    const auto result = project_bbox_footprint(h, box, pose, 100.0);
    REQUIRE(std::holds_alternative<FloorPolygon>(result));
    const double expected = box.width() * box.height() * (height / 400.0) * (height / 400.0);
    CHECK(std::abs(area(std::get<FloorPolygon>(result)) - expected) < 1e-9);
  }
}

TEST_CASE("footprint rejections") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(20.0 * M_PI / 180.0)};
  const RobotPose pose{0.0, 0.0, 0.0, 0.12};
  const FloorHomography h = floor_homography(cam, pose);

  SUBCASE("box reaching the horizon row") {
    const double horizon = 240.0 - 320.0 * std::tan(20.0 * M_PI / 180.0);
    const auto r = project_bbox_footprint(h, PixelBox{300, horizon, 340, 300}, pose, 10.0);
    REQUIRE(std::holds_alternative<RejectReason>(r));
    CHECK(std::get<RejectReason>(r) == RejectReason::AboveHorizon);
  }
  SUBCASE("footprint beyond max depth") {
    // Floor band 0.9 m to 1.0 m ahead: every footprint point is >= 0.9 m away.
    const PixelPoint near = floor_to_image(h, FloorPoint{0.9, 0.0});
    const PixelPoint far = floor_to_image(h, FloorPoint{1.0, 0.0});
    const PixelBox box{310, far.v, 330, near.v};
    const auto r = project_bbox_footprint(h, box, pose, 0.7);
    REQUIRE(std::holds_alternative<RejectReason>(r));
    CHECK(std::get<RejectReason>(r) == RejectReason::TooFar);
    const auto ok = project_bbox_footprint(h, box, pose, 0.95);
    REQUIRE(std::holds_alternative<FloorPolygon>(ok));
    CHECK(distance_to(std::get<FloorPolygon>(ok), pose.position()) == doctest::Approx(0.9).epsilon(1e-6));
  }
  SUBCASE("bbox with no extent") {
    CHECK(code_of([&] { project_bbox_footprint(h, PixelBox{10, 300, 10, 320}, pose); }) == ErrorCode::InvalidBBox);
  }
}

TEST_CASE("shrinking a bbox never grows its footprint") {
  const CameraModel cam{vacuum_intrinsics(), CameraExtrinsics::forward_pitched(0.5)};
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ux(0.0, 640.0), uy(200.0, 480.0), shrink(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const RobotPose pose{0.0, 0.0, 0.3, 0.3};
    const FloorHomography h = floor_homography(cam, pose);
    double x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    const PixelBox outer{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    if (outer.width() < 2 || outer.height() < 2) continue;
    const PixelBox inner{outer.xmin + shrink(rng) * outer.width() / 2, outer.ymin + shrink(rng) * outer.height() / 2,
                         outer.xmax - shrink(rng) * outer.width() / 2, outer.ymax - shrink(rng) * outer.height() / 2};
    if (inner.width() <= 0 || inner.height() <= 0) continue;
    const auto a = project_bbox_footprint(h, outer, pose, 100.0);
    const auto b = project_bbox_footprint(h, inner, pose, 100.0);
    if (!std::holds_alternative<FloorPolygon>(a) || !std::holds_alternative<FloorPolygon>(b)) continue;
    CHECK(area(std::get<FloorPolygon>(b)) <= area(std::get<FloorPolygon>(a)) * (1 + 1e-12));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("heading normalization") {
  CHECK(normalize_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(3 * M_PI / 2) == doctest::Approx(-M_PI / 2));
  CHECK(normalize_angle(0.25) == 0.25);
}

}  // TEST_SUITE
