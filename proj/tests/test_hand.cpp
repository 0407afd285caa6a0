#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "duopaint/hand.hpp"
#include "duopaint/rng.hpp"

using namespace duopaint;

namespace {

HandKeypoints flat_hand(Side side = Side::Right) {
  // wrist at origin, middle MCP at (0.1,0,0), index MCP at (0.1,0.02,0)
  HandKeypoints kp;
  kp.side = side;
  kp.landmarks.fill(Vec3(0.05, -0.02, 0));  // plausible filler
  kp.landmarks[HandKeypoints::kWrist] = Vec3(0, 0, 0);
  kp.landmarks[HandKeypoints::kMiddleMcp] = Vec3(0.1, 0, 0);
  kp.landmarks[HandKeypoints::kIndexMcp] = Vec3(0.1, 0.02, 0);
  kp.landmarks[HandKeypoints::kThumbTip] = Vec3(0.12, 0.05, 0);
  kp.landmarks[HandKeypoints::kIndexTip] = Vec3(0.16, 0.02, 0);
  return kp;
}

Se3Pose random_pose(Rng& rng) {
  return Se3Pose(rng.normal3(0.5), rng.rotation(M_PI));
}

}  // namespace

TEST_CASE("wrist_frame: constructed geometry gives identity rotation") {
  Se3Pose frame = wrist_frame(flat_hand());
  CHECK(frame.t.norm() < 1e-15);
  CHECK(rotation_angle(frame.q) < 1e-12);
}

TEST_CASE("wrist_frame: rigid equivariance") {
  Rng rng(41);
  HandKeypoints base = flat_hand();
  Se3Pose f0 = wrist_frame(base);
  for (int i = 0; i < 200; ++i) {
    Se3Pose t = random_pose(rng);
    Se3Pose moved = wrist_frame(transform_keypoints(t, base));
    Se3Pose expected = compose(t, f0);
    CHECK(translation_distance(moved, expected) < 1e-9);
    CHECK(rotation_distance(moved, expected) < 1e-9);
  }
}

TEST_CASE("wrist_frame: left hand mirrors the palm normal") {
  HandKeypoints right = flat_hand(Side::Right);
  HandKeypoints left = flat_hand(Side::Left);
  Se3Pose fr = wrist_frame(right);
  Se3Pose fl = wrist_frame(left);
  Vec3 zr = fr.rotation_matrix().col(2);
  Vec3 zl = fl.rotation_matrix().col(2);
  CHECK((zr + zl).norm() < 1e-12);  // opposite normals
}

TEST_CASE("wrist_frame: collinear construction vectors degenerate") {
  HandKeypoints kp = flat_hand();
  kp.landmarks[HandKeypoints::kIndexMcp] = Vec3(0.08, 0, 0);  // on the x axis
  try {
    wrist_frame(kp);
    FAIL("expected DegenerateHand");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateHand);
  }
}

TEST_CASE("gripper_angle: constructed angles") {
  HandKeypoints kp = flat_hand();
  Vec3 pivot = kp.landmarks[HandKeypoints::kIndexMcp];
  kp.landmarks[HandKeypoints::kThumbTip] = pivot + Vec3(1, 0, 0);
  kp.landmarks[HandKeypoints::kIndexTip] = pivot + Vec3(0, 1, 0);
  CHECK(gripper_angle(kp) == Catch::Approx(M_PI / 2));

  kp.landmarks[HandKeypoints::kIndexTip] = pivot + Vec3(2, 0, 0);
  CHECK(gripper_angle(kp) == Catch::Approx(0.0).margin(1e-12));

  kp.landmarks[HandKeypoints::kIndexTip] = pivot + Vec3(1e-5, 0, 0);
  try {
    gripper_angle(kp);
    FAIL("expected DegenerateHand");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateHand);
  }
}

TEST_CASE("gripper_angle: matches direct acos formula") {
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    HandKeypoints kp = flat_hand();
    Vec3 pivot = kp.landmarks[HandKeypoints::kIndexMcp];
    Vec3 a = rng.unit_vector() * rng.uniform(0.02, 0.1);
    Vec3 b = rng.unit_vector() * rng.uniform(0.02, 0.1);
    kp.landmarks[HandKeypoints::kThumbTip] = pivot + a;
    kp.landmarks[HandKeypoints::kIndexTip] = pivot + b;
    double expected = std::acos(std::clamp(
        a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
    CHECK(std::abs(gripper_angle(kp) - expected) < 1e-12);
  }
}

TEST_CASE("gripper_angle: invariant under rigid transforms") {
  Rng rng(43);
  HandKeypoints kp = flat_hand();
  double base_angle = gripper_angle(kp);
  for (int i = 0; i < 100; ++i) {
    double moved = gripper_angle(transform_keypoints(random_pose(rng), kp));
    CHECK(std::abs(moved - base_angle) < 1e-12);
  }
}

TEST_CASE("retarget: threshold semantics exact at the boundary") {
  const double threshold = 0.35;
  Se3Pose no_offset = Se3Pose::identity();

  auto with_angle = [&](double angle) {
    HandKeypoints kp = flat_hand();
    Vec3 pivot = kp.landmarks[HandKeypoints::kIndexMcp];
    kp.landmarks[HandKeypoints::kThumbTip] =
        pivot + 0.07 * Vec3(std::cos(angle), std::sin(angle), 0);
    kp.landmarks[HandKeypoints::kIndexTip] = pivot + 0.06 * Vec3(1, 0, 0);
    return kp;
  };

  CHECK(retarget(with_angle(threshold - 0.01), threshold, no_offset).gripper ==
        GripperState::Closed);
  CHECK(retarget(with_angle(threshold + 0.01), threshold, no_offset).gripper ==
        GripperState::Open);
  // exactly at the threshold reads open: closed iff angle < threshold.
  // pin the threshold to the angle the keypoints actually produce so the
  // boundary is hit at machine precision
  HandKeypoints boundary = with_angle(threshold);
  double exact = gripper_angle(boundary);
  CHECK(retarget(boundary, exact, no_offset).gripper == GripperState::Open);
  CHECK(retarget(boundary, std::nextafter(exact, 1.0), no_offset).gripper ==
        GripperState::Closed);

  auto act = retarget(with_angle(0.1), threshold, no_offset);
  CHECK(act.provenance == Provenance::HumanRetargeted);
}

TEST_CASE("retarget: grasp offset composes with the wrist frame") {
  HandKeypoints kp = flat_hand();
  Se3Pose offset(Vec3(0, 0, 0.1),
                 Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX())));
  auto act = retarget(kp, 0.35, offset);
  Se3Pose expected = compose(wrist_frame(kp), offset);
  CHECK(translation_distance(act.pose, expected) < 1e-12);
  CHECK(rotation_distance(act.pose, expected) < 1e-12);
}

TEST_CASE("hysteresis: no two changes closer than min_hold") {
  const double th = 0.35, band = 0.05;
  const int hold = 3;
  Rng rng(44);
  // adversarial: oscillate right around the band edges
  std::vector<double> angles;
  for (int i = 0; i < 200; ++i) {
    double r = rng.uniform();
    angles.push_back(r < 0.5 ? th - band - 0.02 - 0.05 * rng.uniform()
                             : th + band + 0.02 + 0.05 * rng.uniform());
  }
  auto states = apply_gripper_hysteresis(angles, th, band, hold);
  REQUIRE(states.size() == angles.size());
  long last_change = -hold;
  for (std::size_t t = 1; t < states.size(); ++t) {
    if (states[t] != states[t - 1]) {
      CHECK(static_cast<long>(t) - last_change >= hold);
      last_change = static_cast<long>(t);
    }
  }
}

TEST_CASE("hysteresis: band suppresses chatter inside it") {
  const double th = 0.35, band = 0.05;
  std::vector<double> angles = {0.50, 0.34, 0.36, 0.31, 0.39, 0.36, 0.20};
  auto states = apply_gripper_hysteresis(angles, th, band, 1);
  // only the final 0.20 crosses below th - band
  for (std::size_t i = 0; i + 1 < states.size(); ++i)
    CHECK(states[i] == GripperState::Open);
  CHECK(states.back() == GripperState::Closed);
}

TEST_CASE("hysteresis: zero band and hold 1 is the plain threshold") {
  std::vector<double> angles = {0.5, 0.3, 0.349999, 0.35, 0.36, 0.1};
  auto states = apply_gripper_hysteresis(angles, 0.35, 0.0, 1);
  std::vector<GripperState> expected = {
      GripperState::Open,   GripperState::Closed, GripperState::Closed,
      GripperState::Open,   GripperState::Open,   GripperState::Closed};
  CHECK(states == expected);
}

TEST_CASE("hand template: wrist frame is identity, pincer angle exact") {
  for (Side side : {Side::Right, Side::Left}) {
    for (double angle : {0.05, 0.2, 0.35, 0.6, 1.0}) {
      HandKeypoints kp = hand_template_keypoints(angle, side);
      CHECK(gripper_angle(kp) == Catch::Approx(angle).margin(1e-12));
      Se3Pose frame = wrist_frame(kp);
      CHECK(frame.t.norm() < 1e-15);
      CHECK(rotation_angle(frame.q) < 1e-12);
    }
  }
}

TEST_CASE("hand template: posed keypoints carry the wrist pose") {
  Rng rng(45);
  for (int i = 0; i < 20; ++i) {
    Se3Pose pose = random_pose(rng);
    HandKeypoints kp = pose_hand(pose, 0.4, Side::Right);
    Se3Pose frame = wrist_frame(kp);
    CHECK(translation_distance(frame, pose) < 1e-9);
    CHECK(rotation_distance(frame, pose) < 1e-9);
  }
}

TEST_CASE("refine_keypoints: identity when cloud equals the mesh") {
  HandKeypoints kp = pose_hand(Se3Pose(Vec3(0, 0, 0.5), Quat::Identity()), 0.4,
                               Side::Right);
  auto obs = observation_from_keypoints(kp);
  RefineResult r = refine_keypoints(kp, obs.mesh_vertices, obs.mesh_vertices);
  for (int k = 0; k < 21; ++k)
    CHECK((r.keypoints.landmarks[k] - kp.landmarks[k]).norm() < 1e-6);
}

TEST_CASE("refine_keypoints: recovers a known z offset") {
  HandKeypoints kp = pose_hand(Se3Pose(Vec3(0.1, 0.05, 0.5), Quat::Identity()),
                               0.4, Side::Right);
  auto obs = observation_from_keypoints(kp);
  Se3Pose offset(Vec3(0, 0, 0.05), Quat::Identity());
  PointCloud shifted = transform_cloud(offset, obs.mesh_vertices);

  RefineResult r = refine_keypoints(kp, obs.mesh_vertices, shifted);
  for (int k = 0; k < 21; ++k) {
    Vec3 expected = kp.landmarks[k] + Vec3(0, 0, 0.05);
    CHECK((r.keypoints.landmarks[k] - expected).norm() < 1e-3);
  }
}

TEST_CASE("refine_keypoints: empty cloud raises RegistrationFailed") {
  HandKeypoints kp = flat_hand();
  auto obs = observation_from_keypoints(kp);
  PointCloud empty;
  try {
    refine_keypoints(kp, obs.mesh_vertices, empty);
    FAIL("expected RegistrationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegistrationFailed);
  }
}

TEST_CASE("keypoint files: bit-exact round trip") {
  Rng rng(46);
  std::vector<HandKeypoints> frames;
  for (int f = 0; f < 5; ++f)
    frames.push_back(pose_hand(random_pose(rng), rng.uniform(0.1, 0.8),
                               f % 2 ? Side::Left : Side::Right));

  auto dir = std::filesystem::temp_directory_path() / "duopaint_kp_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "kp.json").string();
  save_keypoints_json(path, frames);

  FileHandPoseSource source(path);
  REQUIRE(source.frame_count() == 5);
  for (int f = 0; f < 5; ++f) {
    auto obs = source.frame(f);
    CHECK(obs.keypoints.side == frames[f].side);
    for (int k = 0; k < 21; ++k)
      CHECK(obs.keypoints.landmarks[k] == frames[f].landmarks[k]);  // bit exact
  }
  CHECK_THROWS_AS(source.frame(7), Error);
  std::filesystem::remove_all(dir);
}
