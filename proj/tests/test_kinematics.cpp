#include <catch2/catch_amalgamated.hpp>

#include "duopaint/builtin_robots.hpp"
#include "duopaint/kinematics.hpp"
#include "duopaint/rng.hpp"
#include "duopaint/urdf.hpp"

using namespace duopaint;

namespace {

const char* kTwoLink = R"(
<robot name="two_link">
  <link name="base"/>
  <link name="tip">
    <visual><geometry><box size="0.1 0.1 0.1"/></geometry></visual>
  </link>
  <joint name="swivel" type="revolute">
    <parent link="base"/>
    <child link="tip"/>
    <axis xyz="0 0 1"/>
    <limit lower="-1.5" upper="1.5"/>
  </joint>
</robot>
)";

// planar 2R arm, both links 1 m along +x
const char* kPlanar2R = R"(
<robot name="planar_2r">
  <link name="base"/>
  <link name="link1"/>
  <link name="link2"/>
  <link name="ee"/>
  <joint name="q1" type="revolute">
    <parent link="base"/><child link="link1"/>
    <axis xyz="0 0 1"/><limit lower="-3.14" upper="3.14"/>
  </joint>
  <joint name="q2" type="revolute">
    <origin xyz="1 0 0"/>
    <parent link="link1"/><child link="link2"/>
    <axis xyz="0 0 1"/><limit lower="-3.14" upper="3.14"/>
  </joint>
  <joint name="ee_fixed" type="fixed">
    <origin xyz="1 0 0"/>
    <parent link="link2"/><child link="ee"/>
  </joint>
</robot>
)";

JointConfig planar_q(double a, double b) {
  JointConfig q;
  q.set("q1", a);
  q.set("q2", b);
  return q;
}

KinematicChain builtin_chain() {
  auto chain = parse_urdf(arm_urdf(source_arm_style()));
  chain.ee_link = "grasp_frame";
  return chain;
}

JointConfig random_config(const KinematicChain& chain, Rng& rng) {
  JointConfig q;
  for (const auto& name : chain.actuated_joints) {
    const Joint* j = chain.find_joint(name);
    q.set(name, rng.uniform(j->lower, j->upper));
  }
  return q;
}

// independent oracle: walk the chain with explicit homogeneous matrices
Mat4 matrix_chain_fk(const KinematicChain& chain, const JointConfig& q,
                     const std::string& target_link) {
  std::map<std::string, Mat4> poses;
  poses[chain.root_link] = Mat4::Identity();
  for (int ji : chain.joint_order) {
    const Joint& j = chain.joints[ji];
    Mat4 origin = j.origin.matrix();
    Mat4 motion = Mat4::Identity();
    if (j.type == JointType::Revolute)
      motion.block<3, 3>(0, 0) =
          Eigen::AngleAxisd(q.at(j.name), j.axis).toRotationMatrix();
    else if (j.type == JointType::Prismatic)
      motion.block<3, 1>(0, 3) = q.at(j.name) * j.axis;
    poses[j.child] = poses.at(j.parent) * origin * motion;
  }
  return poses.at(target_link);
}

}  // namespace

TEST_CASE("parse_urdf: two-link fixture") {
  KinematicChain chain = parse_urdf(kTwoLink);
  REQUIRE(chain.links.size() == 2);
  REQUIRE(chain.joints.size() == 1);
  CHECK(chain.root_link == "base");
  CHECK(chain.joints[0].axis.isApprox(Vec3::UnitZ()));
  CHECK(chain.joints[0].type == JointType::Revolute);
  CHECK(chain.actuated_joints == std::vector<std::string>{"swivel"});
  CHECK(chain.ee_link == "tip");
  CHECK(chain.links[1].visual.kind == GeometryKind::Box);
}

TEST_CASE("parse_urdf: error cases") {
  SECTION("malformed XML") {
    try {
      parse_urdf("<robot><link name=");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
  SECTION("joint child names a missing link") {
    const char* bad = R"(
      <robot name="r"><link name="a"/>
      <joint name="j" type="fixed"><parent link="a"/><child link="ghost"/></joint>
      </robot>)";
    try {
      parse_urdf(bad);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
  SECTION("unsupported joint type") {
    const char* bad = R"(
      <robot name="r"><link name="a"/><link name="b"/>
      <joint name="j" type="floating"><parent link="a"/><child link="b"/></joint>
      </robot>)";
    try {
      parse_urdf(bad);
      FAIL("expected UnsupportedElement");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsupportedElement);
    }
  }
  SECTION("cycle") {
    const char* bad = R"(
      <robot name="r"><link name="a"/><link name="b"/>
      <joint name="j1" type="fixed"><parent link="a"/><child link="b"/></joint>
      <joint name="j2" type="fixed"><parent link="b"/><child link="a"/></joint>
      </robot>)";
    try {
      parse_urdf(bad);
      FAIL("expected CycleError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CycleError);
    }
  }
  SECTION("continuous becomes revolute with +-2pi limits") {
    const char* c = R"(
      <robot name="r"><link name="a"/><link name="b"/>
      <joint name="j" type="continuous"><parent link="a"/><child link="b"/>
      <axis xyz="0 0 1"/></joint>
      </robot>)";
    KinematicChain chain = parse_urdf(c);
    CHECK(chain.joints[0].type == JointType::Revolute);
    CHECK(chain.joints[0].lower == Catch::Approx(-2 * M_PI));
    CHECK(chain.joints[0].upper == Catch::Approx(2 * M_PI));
  }
}

TEST_CASE("forward_kinematics: planar 2R analytic poses") {
  KinematicChain chain = parse_urdf(kPlanar2R);
  REQUIRE(chain.ee_link == "ee");

  auto ee0 = fk_ee(chain, planar_q(0, 0));
  CHECK((ee0.t - Vec3(2, 0, 0)).norm() < 1e-12);

  auto ee1 = fk_ee(chain, planar_q(M_PI / 2, 0));
  CHECK((ee1.t - Vec3(0, 2, 0)).norm() < 1e-9);

  auto ee2 = fk_ee(chain, planar_q(M_PI / 2, -M_PI / 2));
  CHECK((ee2.t - Vec3(1, 1, 0)).norm() < 1e-9);

  JointConfig missing;
  missing.set("q1", 0.0);
  CHECK_THROWS_AS(fk_ee(chain, missing), Error);
}

TEST_CASE("forward_kinematics: builtin arm zero config matches hand chain") {
  KinematicChain chain = builtin_chain();
  JointConfig zeros;
  for (const auto& n : chain.actuated_joints) zeros.set(n, 0.0);
  // at zero config every motion is identity: grasp frame height is the sum
  // of the joint origin offsets in the URDF text
  ArmStyle s = source_arm_style();
  double z = 0.06 + s.shoulder + s.upper_arm + s.forearm + s.wrist1 +
             s.wrist2 + 0.02 + 0.085;
  auto ee = fk_ee(chain, zeros);
  CHECK((ee.t - Vec3(0, 0, z)).norm() < 1e-12);
  CHECK(rotation_angle(ee.q) < 1e-12);
}

TEST_CASE("forward_kinematics: matrix-chain oracle on random configs") {
  KinematicChain chain = builtin_chain();
  Rng rng(31);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    JointConfig q = random_config(chain, rng);
    Mat4 expected = matrix_chain_fk(chain, q, "grasp_frame");
    Mat4 got = fk_ee(chain, q).matrix();
    worst = std::max(worst, (expected - got).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("forward_kinematics: composes across any chain split") {
  KinematicChain chain = builtin_chain();
  Rng rng(32);
  JointConfig q = random_config(chain, rng);
  auto poses = forward_kinematics(chain, q);
  Se3Pose fore = poses.at("forearm_link");
  Se3Pose ee = poses.at("grasp_frame");
  Se3Pose rel = compose(invert(fore), ee);
  Se3Pose recomposed = compose(fore, rel);
  CHECK(translation_distance(recomposed, ee) < 1e-12);
  CHECK(rotation_distance(recomposed, ee) < 1e-12);
}

TEST_CASE("jacobian: planar 2R analytic values") {
  KinematicChain chain = parse_urdf(kPlanar2R);
  Eigen::MatrixXd jac = jacobian(chain, planar_q(0, 0));
  REQUIRE(jac.cols() == 2);  // fixed joint contributes no column
  CHECK(jac(1, 0) == Catch::Approx(2.0));  // dy/dq1
  CHECK(jac(1, 1) == Catch::Approx(1.0));  // dy/dq2
  CHECK(jac(0, 0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(jac(5, 0) == Catch::Approx(1.0));  // wz
}

TEST_CASE("jacobian: finite-difference oracle on 100 random configs") {
  KinematicChain chain = builtin_chain();
  Rng rng(33);
  const double h = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    JointConfig q = random_config(chain, rng);
    Eigen::MatrixXd jac = jacobian(chain, q);
    for (int c = 0; c < static_cast<int>(chain.actuated_joints.size()); ++c) {
      const std::string& name = chain.actuated_joints[c];
      JointConfig qp = q, qm = q;
      qp.set(name, q.at(name) + h);
      qm.set(name, q.at(name) - h);
      Se3Pose pp = fk_ee(chain, qp), pm = fk_ee(chain, qm);
      Vec3 dv = (pp.t - pm.t) / (2 * h);
      Quat dq = pp.q * pm.q.conjugate();
      Eigen::AngleAxisd aa(dq);
      double ang = aa.angle() > M_PI ? aa.angle() - 2 * M_PI : aa.angle();
      Vec3 dw = ang * aa.axis() / (2 * h);
      worst = std::max(worst, (jac.block<3, 1>(0, c) - dv).cwiseAbs().maxCoeff());
      worst = std::max(worst, (jac.block<3, 1>(3, c) - dw).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("jacobian: off-path finger joints have zero columns") {
  KinematicChain chain = builtin_chain();
  Rng rng(34);
  JointConfig q = random_config(chain, rng);
  Eigen::MatrixXd jac = jacobian(chain, q);
  REQUIRE(jac.cols() == 8);  // 6 arm + 2 finger joints
  for (int c = 0; c < 8; ++c) {
    bool finger = chain.actuated_joints[c].rfind("finger", 0) == 0;
    if (finger) CHECK(jac.col(c).norm() == 0.0);
  }
}

TEST_CASE("solve_ik: target at seed returns immediately") {
  KinematicChain chain = builtin_chain();
  Rng rng(35);
  JointConfig seed = random_config(chain, rng);
  Se3Pose target = fk_ee(chain, seed);
  IkResult r = solve_ik(chain, target, seed);
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  for (const auto& [name, v] : seed.values)
    CHECK(r.joints.at(name) == Catch::Approx(v));
}

TEST_CASE("solve_ik: reaches FK targets from perturbed seeds") {
  KinematicChain chain = builtin_chain();
  Rng rng(36);
  int ok = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    JointConfig truth = random_config(chain, rng);
    Se3Pose target = fk_ee(chain, truth);
    JointConfig seed = truth;
    for (auto& [name, v] : seed.values) v += rng.normal() * 0.1;
    chain.clamp_to_limits(seed);
    IkResult r = solve_ik(chain, target, seed);
    if (!r.converged) continue;
    ++ok;
    Se3Pose reached = fk_ee(chain, r.joints);
    CHECK(translation_distance(reached, target) <= 1e-4);
    CHECK(rotation_distance(reached, target) <= 1e-3);
    CHECK(chain.within_limits(r.joints));
  }
  CHECK(ok >= trials - 1);
}

TEST_CASE("solve_ik: unreachable target reports monotone best error") {
  KinematicChain chain = builtin_chain();
  Rng rng(37);
  JointConfig seed = random_config(chain, rng);
  Se3Pose target(Vec3(10, 0, 0), Quat::Identity());
  IkResult r = solve_ik(chain, target, seed);
  CHECK_FALSE(r.converged);
  CHECK(r.pos_error > 1.0);
  for (std::size_t i = 1; i < r.error_history.size(); ++i)
    CHECK(r.error_history[i] <= r.error_history[i - 1] + 1e-12);
  CHECK(r.best_error <= r.error_history.front());
}

TEST_CASE("gripper_width_to_joints: linear map and fingertip separation") {
  ArmStyle style = source_arm_style();
  KinematicChain chain = builtin_chain();
  GripperWidthMap map = arm_gripper_map(style);

  JointConfig closed = gripper_width_to_joints(chain, map, 0.0);
  CHECK(closed.at("finger_left_joint") == 0.0);
  CHECK(closed.at("finger_right_joint") == 0.0);

  JointConfig open = gripper_width_to_joints(chain, map, map.max_width);
  CHECK(open.at("finger_left_joint") == Catch::Approx(style.finger_travel));

  JointConfig half = gripper_width_to_joints(chain, map, map.max_width / 2);
  CHECK(half.at("finger_left_joint") == Catch::Approx(style.finger_travel / 2));

  // clamping
  CHECK(gripper_width_to_joints(chain, map, -1).at("finger_left_joint") == 0.0);
  CHECK(gripper_width_to_joints(chain, map, 1).at("finger_left_joint") ==
        Catch::Approx(style.finger_travel));

  // FK fingertip separation equals the commanded width
  for (double width : {0.01, 0.035, 0.08}) {
    JointConfig q = arm_home_config();
    for (const auto& [n, v] : gripper_width_to_joints(chain, map, width).values)
      q.set(n, v);
    auto poses = forward_kinematics(chain, q);
    Vec3 left = poses.at("finger_left_link").t;
    Vec3 right = poses.at("finger_right_link").t;
    CHECK((left - right).norm() == Catch::Approx(width).epsilon(0.02));
  }
}
