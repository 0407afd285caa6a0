#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "duopaint/kdtree.hpp"
#include "duopaint/pointcloud.hpp"
#include "duopaint/registration.hpp"
#include "duopaint/rng.hpp"

using namespace duopaint;

namespace {

PointCloud random_blob(Rng& rng, int n, double extent = 0.1) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    c.points.push_back(rng.normal3(extent));
  return c;
}

std::vector<std::pair<int, int>> identity_pairs(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) pairs.emplace_back(i, i);
  return pairs;
}

}  // namespace

TEST_CASE("fit_rigid: target == source gives identity") {
  Rng rng(21);
  PointCloud c = random_blob(rng, 50);
  Se3Pose fit = fit_rigid(c.points, c.points, identity_pairs(50));
  CHECK(fit.t.norm() < 1e-12);
  CHECK(rotation_angle(fit.q) < 1e-12);
}

TEST_CASE("fit_rigid: recovers a constructed transform") {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud src = random_blob(rng, 30);
    Se3Pose truth(rng.normal3(0.5), rng.rotation(M_PI));
    std::vector<Vec3> dst;
    for (const auto& p : src.points) dst.push_back(transform_point(truth, p));
    Se3Pose fit = fit_rigid(src.points, dst, identity_pairs(30));
    CHECK(translation_distance(fit, truth) < 1e-9);
    CHECK(rotation_distance(fit, truth) < 1e-9);
    CHECK(fit.rotation_matrix().determinant() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("fit_rigid: degenerate correspondence sets") {
  std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(fit_rigid(two, two, identity_pairs(2)), Error);

  std::vector<Vec3> collinear = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  try {
    fit_rigid(collinear, collinear, identity_pairs(4));
    FAIL("expected DegenerateCorrespondences");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateCorrespondences);
  }

  std::vector<Vec3> coincident(5, Vec3(1, 2, 3));
  CHECK_THROWS_AS(fit_rigid(coincident, coincident, identity_pairs(5)), Error);
}

TEST_CASE("kd-tree: fixed cases") {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  KdTree3 tree(c.points);

  auto hit = tree.nearest(Vec3(1, 0, 0), 10.0);
  REQUIRE(hit.has_value());
  CHECK(hit->index == 1);
  CHECK(hit->distance == 0.0);

  CHECK_FALSE(tree.nearest(Vec3(5, 5, 5), 0.5).has_value());
}

TEST_CASE("kd-tree: matches brute force on 10^4 random queries") {
  Rng rng(23);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back(rng.normal3(0.5));
  KdTree3 tree(pts);

  const double radius = 0.15;
  for (int i = 0; i < 10000; ++i) {
    Vec3 q = rng.normal3(0.6);
    auto hit = tree.nearest(q, radius);

    int best = -1;
    double best_sq = radius * radius;
    for (int j = 0; j < static_cast<int>(pts.size()); ++j) {
      double d = (pts[j] - q).squaredNorm();
      if (d < best_sq || (d == best_sq && best < 0)) {
        best_sq = d;
        best = j;
      }
    }
    if (best < 0) {
      CHECK_FALSE(hit.has_value());
    } else {
      REQUIRE(hit.has_value());
      CHECK(static_cast<int>(hit->index) == best);
    }
  }
}

TEST_CASE("nearest_neighbors: per-query API") {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 1, 1}};
  auto res = nearest_neighbors(c, {{0.1, 0, 0}, {9, 9, 9}}, 0.5);
  REQUIRE(res.size() == 2);
  REQUIRE(res[0].has_value());
  CHECK(res[0]->index == 0);
  CHECK_FALSE(res[1].has_value());
}

TEST_CASE("icp: target == source converges immediately") {
  Rng rng(24);
  PointCloud c = random_blob(rng, 200);
  IcpResult r = icp_register(c, c, Se3Pose::identity());
  CHECK(r.rmse < 1e-12);
  CHECK(r.transform.t.norm() < 1e-12);
  CHECK(rotation_angle(r.transform.q) < 1e-12);
  CHECK(r.iterations <= 2);
  CHECK(r.inlier_fraction == Catch::Approx(1.0));
}

TEST_CASE("icp: recovers known rotation + translation") {
  Rng rng(25);
  PointCloud src = random_blob(rng, 400, 0.05);
  Se3Pose truth(Vec3(0.015, -0.01, 0.02),
                Quat(Eigen::AngleAxisd(10.0 * M_PI / 180.0,
                                       Vec3(0.2, 0.5, 1).normalized())));
  PointCloud dst = transform_cloud(truth, src);

  IcpResult r = icp_register(src, dst, Se3Pose::identity());
  CHECK(translation_distance(r.transform, truth) < 1e-4);
  CHECK(rotation_distance(r.transform, truth) < 1e-3);
  CHECK(r.rmse < 1e-6);

  for (std::size_t i = 1; i < r.rmse_history.size(); ++i)
    CHECK(r.rmse_history[i] <= r.rmse_history[i - 1] + 1e-15);
}

TEST_CASE("icp: empty clouds and hopeless initialization") {
  PointCloud empty, one;
  one.points = {{0, 0, 0}};
  CHECK_THROWS_AS(icp_register(empty, one, Se3Pose::identity()), Error);
  CHECK_THROWS_AS(icp_register(one, empty, Se3Pose::identity()), Error);

  // two single points 10 m apart with a tiny radius: centroid pre-alignment
  // closes the gap, so shift the target shape instead so no fit is possible
  PointCloud a, b;
  a.points = {{0, 0, 0}, {1, 0, 0}};
  b.points = {{100, 0, 0}, {100.001, 0, 0}};
  IcpParams params;
  params.corr_dist = 1e-6;
  CHECK_THROWS_AS(icp_register(a, b, Se3Pose::identity(), params), Error);
}

TEST_CASE("ply: round trip ascii and binary") {
  Rng rng(26);
  PointCloud c = random_blob(rng, 64);
  for (std::size_t i = 0; i < c.points.size(); ++i)
    c.normals.push_back(rng.unit_vector());

  auto dir = std::filesystem::temp_directory_path() / "duopaint_ply_test";
  std::filesystem::create_directories(dir);
  for (bool binary : {false, true}) {
    auto path = (dir / (binary ? "b.ply" : "a.ply")).string();
    save_ply(path, c, binary);
    PointCloud back = load_ply_cloud(path);
    REQUIRE(back.size() == c.size());
    REQUIRE(back.has_normals());
    for (std::size_t i = 0; i < c.size(); ++i) {
      // stored as float32: compare at float precision
      CHECK((back.points[i] - c.points[i]).norm() < 1e-6);
    }
  }
  std::filesystem::remove_all(dir);
}
