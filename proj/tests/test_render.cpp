#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "duopaint/builtin_robots.hpp"
#include "duopaint/render.hpp"
#include "duopaint/rng.hpp"
#include "duopaint/urdf.hpp"

using namespace duopaint;

namespace {

const Vec3 kLight = Vec3(0.3, -0.5, -0.8).normalized();

Camera test_camera(int w = 640, int h = 480, double f = 500) {
  Camera cam;
  cam.intrinsics = {f, f, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
  cam.extrinsic = Se3Pose::identity();
  return cam;
}

TriangleMesh quad_at(double z, double half, const Vec3& color) {
  TriangleMesh m;
  m.color = color;
  m.vertices = {{-half, -half, z}, {half, -half, z}, {half, half, z},
                {-half, half, z}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

struct MaskStats {
  double cx = 0, cy = 0;
  long count = 0;
};

MaskStats id_centroid(const IdImage& ids, std::uint16_t id) {
  MaskStats s;
  for (int y = 0; y < ids.height; ++y)
    for (int x = 0; x < ids.width; ++x)
      if (ids.at(x, y) == id) {
        s.cx += x;
        s.cy += y;
        ++s.count;
      }
  if (s.count) {
    s.cx /= s.count;
    s.cy /= s.count;
  }
  return s;
}

MaskStats mask_centroid_any(const IdImage& ids) {
  MaskStats s;
  for (int y = 0; y < ids.height; ++y)
    for (int x = 0; x < ids.width; ++x)
      if (ids.at(x, y) != 0) {
        s.cx += x;
        s.cy += y;
        ++s.count;
      }
  if (s.count) {
    s.cx /= s.count;
    s.cy /= s.count;
  }
  return s;
}

}  // namespace

TEST_CASE("render_scene: empty scene") {
  auto out = render_scene({}, test_camera(64, 48), kLight);
  for (float d : out.depth.data) CHECK(d == 0.f);
  for (auto id : out.instance_mask.data) CHECK(id == 0);
}

TEST_CASE("render_scene: unit cube centered 2m ahead") {
  std::vector<MeshInstance> scene;
  scene.push_back({make_box(Vec3(1, 1, 1)),
                   Se3Pose(Vec3(0, 0, 2), Quat::Identity()), 7});
  Camera cam = test_camera();
  auto out = render_scene(scene, cam, kLight);

  auto stats = id_centroid(out.instance_mask, 7);
  REQUIRE(stats.count > 1000);
  CHECK(std::abs(stats.cx - cam.intrinsics.cx) < 1.0);
  CHECK(std::abs(stats.cy - cam.intrinsics.cy) < 1.0);

  float min_depth = 1e9f;
  for (float d : out.depth.data)
    if (d > 0) min_depth = std::min(min_depth, d);
  CHECK(min_depth == Catch::Approx(1.5).margin(1e-3));
}

TEST_CASE("render_scene: z-buffer keeps the nearer instance") {
  std::vector<MeshInstance> scene;
  scene.push_back({quad_at(2.0, 0.4, Vec3(1, 0, 0)), Se3Pose::identity(), 1});
  scene.push_back({quad_at(1.0, 0.15, Vec3(0, 1, 0)), Se3Pose::identity(), 2});
  auto out = render_scene(scene, test_camera(), kLight);

  // overlap region projects the small near quad; all of it must carry id 2
  auto near_stats = id_centroid(out.instance_mask, 2);
  REQUIRE(near_stats.count > 0);
  for (int y = 0; y < out.depth.height; ++y)
    for (int x = 0; x < out.depth.width; ++x)
      if (out.instance_mask.at(x, y) == 2)
        CHECK(out.depth.at(x, y) == Catch::Approx(1.0).margin(1e-6));
  // far quad still visible around it
  CHECK(id_centroid(out.instance_mask, 1).count > 0);
}

TEST_CASE("render_scene: mask set exactly where depth is set") {
  std::vector<MeshInstance> scene;
  scene.push_back({make_sphere(0.3), Se3Pose(Vec3(0.2, 0.1, 1.5), Quat::Identity()), 3});
  auto out = render_scene(scene, test_camera(160, 120, 120), kLight);
  for (std::size_t i = 0; i < out.depth.data.size(); ++i)
    CHECK((out.depth.data[i] > 0.f) == (out.instance_mask.data[i] != 0));
}

TEST_CASE("render_scene: deterministic across calls") {
  std::vector<MeshInstance> scene;
  scene.push_back({make_cylinder(0.2, 0.5),
                   Se3Pose(Vec3(0, 0, 1.2),
                           Quat(Eigen::AngleAxisd(0.7, Vec3(1, 1, 0).normalized()))),
                   4});
  auto a = render_scene(scene, test_camera(320, 240, 250), kLight);
  auto b = render_scene(scene, test_camera(320, 240, 250), kLight);
  CHECK(a.rgb == b.rgb);
  CHECK(a.depth == b.depth);
  CHECK(a.instance_mask == b.instance_mask);
}

TEST_CASE("render_robot: behind camera gives empty mask") {
  RobotModel model = RobotModel::build(parse_urdf(arm_urdf(source_arm_style())));
  JointConfig q = arm_home_config();
  Se3Pose base(Vec3(0, 0, -3), Quat::Identity());
  auto out = render_robot(model, q, base, test_camera(160, 120, 120), kLight);
  for (auto id : out.instance_mask.data) CHECK(id == 0);
}

TEST_CASE("render_robot: EE marker mask tracks the projected EE point") {
  RobotModel model = RobotModel::build(parse_urdf(arm_urdf(source_arm_style())));
  model.chain.ee_link = "grasp_frame";
  std::uint16_t ee_id = static_cast<std::uint16_t>(
      1 + model.chain.link_index.at("grasp_frame"));

  Camera cam;
  cam.intrinsics = {580, 580, 319.5, 239.5, 640, 480};
  cam.extrinsic = look_at_extrinsic(Vec3(0, -0.9, 0.85), Vec3(0, 0.2, 0.1));

  Se3Pose base(Vec3(0, 0.25, 0), Quat::Identity());
  Rng rng(51);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    JointConfig q = arm_home_config();
    q.set("joint_1", rng.uniform(-0.5, 0.5));
    q.set("joint_2", rng.uniform(0.5, 1.1));
    q.set("joint_3", rng.uniform(1.2, 1.9));
    q.set("joint_5", rng.uniform(0.4, 1.0));
    auto out = render_robot(model, q, base, cam, kLight);
    auto stats = id_centroid(out.instance_mask, ee_id);
    if (stats.count < 4) continue;  // marker occluded in this pose
    Vec3 ee = fk_ee(model.chain, q, base).t;
    Vec2 px = project(cam.intrinsics, cam.world_to_camera(ee));
    double err = std::hypot(stats.cx - px.x(), stats.cy - px.y());
    CHECK(err < 3.0);
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("render_robot: missing mesh file raises") {
  const char* with_mesh = R"(
    <robot name="r"><link name="a">
      <visual><geometry><mesh filename="not_there.obj"/></geometry></visual>
    </link></robot>)";
  try {
    RobotModel::build(parse_urdf(with_mesh), "/tmp");
    FAIL("expected MissingMesh");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingMesh);
  }
}

TEST_CASE("brightness_augment: identity, determinism, arithmetic") {
  std::vector<MeshInstance> scene;
  scene.push_back({quad_at(1.0, 0.3, Vec3(0.8, 0.8, 0.8)), Se3Pose::identity(), 1});
  auto base = render_scene(scene, test_camera(64, 64, 60), kLight);

  auto same = brightness_augment(base, 1.0, 1.0, 42);
  CHECK(same.rgb == base.rgb);

  auto a = brightness_augment(base, 0.8, 1.2, 77);
  auto b = brightness_augment(base, 0.8, 1.2, 77);
  CHECK(a.rgb == b.rgb);
  CHECK(a.depth == base.depth);
  CHECK(a.instance_mask == base.instance_mask);

  // outside the mask nothing changes
  for (std::size_t i = 0; i < base.instance_mask.data.size(); ++i)
    if (base.instance_mask.data[i] == 0)
      for (int c = 0; c < 3; ++c)
        CHECK(a.rgb.data[i * 3 + c] == base.rgb.data[i * 3 + c]);

  // exact halving on a known pixel value
  RenderOutput fixed;
  fixed.rgb = RgbImage(2, 1, 0);
  fixed.depth = DepthImage(2, 1, 1.f);
  fixed.instance_mask = IdImage(2, 1, 1);
  fixed.rgb.at(0, 0, 0) = 200;
  fixed.instance_mask.at(1, 0) = 0;
  fixed.rgb.at(1, 0, 0) = 200;
  auto halved = brightness_augment(fixed, 0.5, 0.5, 1);
  CHECK(halved.rgb.at(0, 0, 0) == 100);
  CHECK(halved.rgb.at(1, 0, 0) == 200);  // unmasked pixel untouched

  CHECK_THROWS_AS(brightness_augment(fixed, 0.0, 1.0, 1), Error);
  CHECK_THROWS_AS(brightness_augment(fixed, 1.2, 0.8, 1), Error);
}

TEST_CASE("mesh files: OBJ and PLY round trips preserve geometry") {
  TriangleMesh m = make_cylinder(0.1, 0.3, 16);
  auto dir = std::filesystem::temp_directory_path() / "duopaint_mesh_test";
  std::filesystem::create_directories(dir);

  save_obj((dir / "c.obj").string(), m);
  TriangleMesh obj = load_obj((dir / "c.obj").string());
  REQUIRE(obj.vertices.size() == m.vertices.size());
  REQUIRE(obj.triangles.size() == m.triangles.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    CHECK((obj.vertices[i] - m.vertices[i]).norm() < 1e-7);

  save_ply_mesh((dir / "c.ply").string(), m);
  TriangleMesh ply = load_ply_mesh((dir / "c.ply").string());
  REQUIRE(ply.vertices.size() == m.vertices.size());
  REQUIRE(ply.triangles.size() == m.triangles.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    CHECK((ply.vertices[i] - m.vertices[i]).norm() < 1e-6);

  std::filesystem::remove_all(dir);
}

TEST_CASE("reprojection: rendered plane from two views (renderer as oracle)") {
  TriangleMesh plane = make_checker_plane(1.2, 0.9, 12, Vec3(0.85, 0.8, 0.7),
                                          Vec3(0.35, 0.4, 0.45));
  std::vector<MeshInstance> scene;
  scene.push_back({plane, Se3Pose::identity(), 1});

  Camera src, dst;
  src.intrinsics = {400, 400, 159.5, 119.5, 320, 240};
  dst.intrinsics = src.intrinsics;
  src.extrinsic = look_at_extrinsic(Vec3(0, -0.7, 0.8), Vec3(0, 0, 0));
  dst.extrinsic = look_at_extrinsic(Vec3(0.12, -0.68, 0.78), Vec3(0, 0, 0));

  auto view_src = render_scene(scene, src, kLight);
  auto view_dst = render_scene(scene, dst, kLight);  // direct render oracle

  auto re = reproject_depth_image(view_src.rgb, view_src.depth, src, dst);

  long valid = 0, close = 0;
  for (int y = 0; y < 240; ++y)
    for (int x = 0; x < 320; ++x) {
      if (re.holes.at(x, y) || view_dst.depth.at(x, y) == 0.f) continue;
      ++valid;
      bool ok = true;
      for (int c = 0; c < 3; ++c)
        if (std::abs(int(re.rgb.at(x, y, c)) - int(view_dst.rgb.at(x, y, c))) > 1)
          ok = false;
      if (ok) ++close;
    }
  REQUIRE(valid > 10000);
  CHECK(double(close) / double(valid) >= 0.95);
}
