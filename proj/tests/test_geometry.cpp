#include <catch2/catch_amalgamated.hpp>

#include "duopaint/geometry.hpp"
#include "duopaint/rng.hpp"

using namespace duopaint;

namespace {

// Independent oracle: quaternion -> rotation matrix via the textbook
// element formula, poses composed as homogeneous 4x4 products.
Mat3 quat_matrix_oracle(const Quat& q) {
  double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Mat4 pose_matrix_oracle(const Se3Pose& p) {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = quat_matrix_oracle(p.q);
  m.block<3, 1>(0, 3) = p.t;
  return m;
}

Se3Pose random_pose(Rng& rng) {
  return Se3Pose(rng.normal3(1.0), rng.rotation(M_PI));
}

}  // namespace

TEST_CASE("compose: identity and inverse") {
  Rng rng(11);
  Se3Pose p = random_pose(rng);
  Se3Pose id = Se3Pose::identity();

  Se3Pose ip = compose(id, p);
  CHECK(translation_distance(ip, p) < 1e-15);
  CHECK(rotation_distance(ip, p) < 1e-15);

  Se3Pose round = compose(p, invert(p));
  CHECK(round.t.norm() < 1e-9);
  CHECK(rotation_angle(round.q) < 1e-9);

  Se3Pose round2 = compose(invert(p), p);
  CHECK(round2.t.norm() < 1e-9);
  CHECK(rotation_angle(round2.q) < 1e-9);
}

TEST_CASE("compose: matches homogeneous matrix product") {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    Se3Pose a = random_pose(rng), b = random_pose(rng);
    Mat4 expected = pose_matrix_oracle(a) * pose_matrix_oracle(b);
    Mat4 got = compose(a, b).matrix();
    CHECK((expected - got).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("compose: quaternion stays unit under long chains") {
  Rng rng(13);
  Se3Pose acc = Se3Pose::identity();
  for (int i = 0; i < 10000; ++i) acc = compose(acc, random_pose(rng));
  CHECK(std::abs(acc.q.norm() - 1.0) < 1e-9);
}

TEST_CASE("transform_point: fixed cases") {
  Se3Pose shift(Vec3(1, 0, 0), Quat::Identity());
  CHECK((transform_point(shift, Vec3(0, 0, 0)) - Vec3(1, 0, 0)).norm() < 1e-15);

  Se3Pose rot_z(Vec3::Zero(), Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())));
  CHECK((transform_point(rot_z, Vec3(1, 0, 0)) - Vec3(-1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("transform_point: matrix oracle on 10^4 samples") {
  Rng rng(14);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    Se3Pose p = random_pose(rng);
    Vec3 x = rng.normal3(2.0);
    Eigen::Vector4d xh(x.x(), x.y(), x.z(), 1.0);
    Vec3 expected = (pose_matrix_oracle(p) * xh).head<3>();
    worst = std::max(worst, (transform_point(p, x) - expected).norm());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("project: fixed cases and error") {
  CameraIntrinsics intr{100, 100, 50, 50, 100, 100};
  Vec2 uv = project(intr, Vec3(0, 0, 1));
  CHECK(uv.x() == Catch::Approx(50));
  CHECK(uv.y() == Catch::Approx(50));

  uv = project(intr, Vec3(0.5, 0, 1));
  CHECK(uv.x() == Catch::Approx(100));
  CHECK(uv.y() == Catch::Approx(50));

  CHECK_THROWS_AS(project(intr, Vec3(0, 0, 0)), Error);
  CHECK_THROWS_AS(project(intr, Vec3(0, 0, -1)), Error);
}

TEST_CASE("backproject: fixed cases and errors") {
  CameraIntrinsics intr{100, 100, 50, 50, 100, 100};
  CHECK((backproject(intr, Vec2(50, 50), 2.0) - Vec3(0, 0, 2)).norm() < 1e-15);
  CHECK((backproject(intr, Vec2(100, 50), 1.0) - Vec3(0.5, 0, 1)).norm() < 1e-15);
  CHECK_THROWS_AS(backproject(intr, Vec2(0, 0), 0.0), Error);
  CHECK_THROWS_AS(backproject(intr, Vec2(0, 0), -1.0), Error);
  CHECK_THROWS_AS(backproject(intr, Vec2(0, 0), std::nan("")), Error);
}

TEST_CASE("project/backproject round trip on 1000 random pixels") {
  CameraIntrinsics intr{431.5, 429.7, 317.2, 243.9, 640, 480};
  Rng rng(15);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec2 px(rng.uniform(0, intr.width - 1), rng.uniform(0, intr.height - 1));
    double d = rng.uniform(0.2, 5.0);
    Vec3 p = backproject(intr, px, d);
    Vec2 back = project(intr, p);
    worst = std::max(worst, (back - px).norm());
    CHECK(p.z() == Catch::Approx(d));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("reproject: identical calibration is the identity") {
  Camera cam;
  cam.intrinsics = {200, 200, 80, 60, 160, 120};
  cam.extrinsic = Se3Pose(Vec3(0.1, -0.2, 0.3),
                          Quat(Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized())));
  Rng rng(16);
  RgbImage rgb(160, 120);
  DepthImage depth(160, 120);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x) {
      for (int c = 0; c < 3; ++c)
        rgb.at(x, y, c) = static_cast<std::uint8_t>(rng.next() % 256);
      depth.at(x, y) = rng.uniform() < 0.1
                           ? 0.f
                           : static_cast<float>(rng.uniform(0.5, 3.0));
    }

  auto out = reproject_depth_image(rgb, depth, cam, cam);
  REQUIRE(out.depth.width == 160);
  int holes = 0;
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x) {
      if (depth.at(x, y) > 0.f) {
        CHECK(out.depth.at(x, y) == depth.at(x, y));
        CHECK(out.holes.at(x, y) == 0);
        for (int c = 0; c < 3; ++c) CHECK(out.rgb.at(x, y, c) == rgb.at(x, y, c));
      } else {
        CHECK(out.holes.at(x, y) != 0);
        ++holes;
      }
    }
  CHECK(holes > 0);  // fixture actually exercises invalid depth
}

TEST_CASE("reproject: single point lands where dst projection says") {
  Camera src, dst;
  src.intrinsics = {300, 300, 64, 64, 128, 128};
  dst.intrinsics = src.intrinsics;
  src.extrinsic = Se3Pose::identity();
  // dst camera sits 5 cm to the right of src, same orientation
  dst.extrinsic = Se3Pose(Vec3(-0.05, 0, 0), Quat::Identity());

  RgbImage rgb(128, 128);
  DepthImage depth(128, 128);
  rgb.at(70, 50, 0) = 255;
  depth.at(70, 50) = 1.25f;

  Vec3 p_src = backproject(src.intrinsics, Vec2(70, 50), 1.25);
  Vec3 p_dst = transform_point(compose(dst.extrinsic, invert(src.extrinsic)), p_src);
  Vec2 expect = project(dst.intrinsics, p_dst);

  auto out = reproject_depth_image(rgb, depth, src, dst);
  int u = static_cast<int>(std::lround(expect.x()));
  int v = static_cast<int>(std::lround(expect.y()));
  REQUIRE(out.rgb.in_bounds(u, v));
  CHECK(out.rgb.at(u, v, 0) == 255);
  CHECK(out.holes.at(u, v) == 0);
  CHECK(out.depth.at(u, v) == Catch::Approx(p_dst.z()).margin(1e-6));
}
