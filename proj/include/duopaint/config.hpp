#pragma once

#include <filesystem>
#include <string>

#include "duopaint/builtin_robots.hpp"
#include "duopaint/geometry.hpp"
#include "duopaint/json_util.hpp"
#include "duopaint/kinematics.hpp"
#include "duopaint/registration.hpp"

namespace duopaint {

/// One arm: URDF reference, end-effector naming, home config, gripper
/// width map, and the flange-to-grasp offset.
struct RobotArmConfig {
  std::string urdf_ref = "builtin:source_arm";  // builtin:<name> or a path
  std::string urdf_text;                        // resolved content
  std::string urdf_dir;                         // mesh resolution base
  std::string ee_link = "grasp_frame";
  JointConfig home;
  GripperWidthMap gripper;
  Se3Pose flange_to_grasp;  // identity when ee_link is the grasp frame

  static RobotArmConfig builtin(const ArmStyle& style) {
    RobotArmConfig c;
    c.urdf_ref = "builtin:" + style.name;
    c.urdf_text = arm_urdf(style);
    c.home = arm_home_config();
    c.gripper = arm_gripper_map(style);
    return c;
  }
};

/// A deployed robot: one arm model placed at per-side base poses. The source
/// robot occupies one side per episode; the target bimanual robot uses both.
/// Base poses are operator-provided calibration.
struct RobotRig {
  RobotArmConfig arm;
  Se3Pose base_left;
  Se3Pose base_right;

  const Se3Pose& base(Side side) const {
    return side == Side::Left ? base_left : base_right;
  }
};

// default bases flank the table, each arm yawed to face the center
inline RobotRig default_source_rig() {
  RobotRig rig;
  rig.arm = RobotArmConfig::builtin(source_arm_style());
  rig.base_left = Se3Pose(Vec3(-0.42, 0.22, 0), Quat::Identity());
  rig.base_right = Se3Pose(Vec3(0.42, 0.22, 0),
                           Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())));
  return rig;
}

inline RobotRig default_target_rig() {
  RobotRig rig;
  rig.arm = RobotArmConfig::builtin(target_arm_style());
  rig.base_left = Se3Pose(Vec3(-0.42, 0.22, 0), Quat::Identity());
  rig.base_right = Se3Pose(Vec3(0.42, 0.22, 0),
                           Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())));
  return rig;
}

inline json gripper_map_to_json(const GripperWidthMap& map) {
  json fingers = json::array();
  for (const auto& f : map.fingers)
    fingers.push_back(
        {{"joint", f.joint}, {"closed", f.closed}, {"open", f.open}});
  return {{"max_width", map.max_width}, {"fingers", fingers}};
}

inline GripperWidthMap gripper_map_from_json(const json& j) {
  GripperWidthMap map;
  map.max_width = j.at("max_width");
  for (const auto& f : j.at("fingers"))
    map.fingers.push_back({f.at("joint"), f.at("closed"), f.at("open")});
  return map;
}

inline json joint_config_to_json(const JointConfig& q) {
  json j = json::object();
  for (const auto& [name, v] : q.values) j[name] = v;
  return j;
}

inline JointConfig joint_config_from_json(const json& j) {
  JointConfig q;
  for (auto it = j.begin(); it != j.end(); ++it)
    q.set(it.key(), it.value().get<double>());
  return q;
}

inline json arm_config_to_json(const RobotArmConfig& c) {
  return {{"urdf", c.urdf_ref},
          {"ee_link", c.ee_link},
          {"home", joint_config_to_json(c.home)},
          {"gripper", gripper_map_to_json(c.gripper)},
          {"flange_to_grasp", pose_to_json(c.flange_to_grasp)}};
}

/// Resolves builtin:<name> references or reads the URDF file next to the
/// config file (relative paths resolve against `base_dir`).
inline RobotArmConfig arm_config_from_json(const json& j,
                                           const std::string& base_dir = "") {
  RobotArmConfig c;
  c.urdf_ref = j.at("urdf").get<std::string>();
  if (c.urdf_ref == "builtin:source_arm") {
    c.urdf_text = arm_urdf(source_arm_style());
  } else if (c.urdf_ref == "builtin:target_arm") {
    c.urdf_text = arm_urdf(target_arm_style());
  } else if (c.urdf_ref.rfind("builtin:", 0) == 0) {
    raise(ErrorCode::ConfigError, "unknown builtin robot " + c.urdf_ref);
  } else {
    std::filesystem::path p(c.urdf_ref);
    if (p.is_relative() && !base_dir.empty())
      p = std::filesystem::path(base_dir) / p;
    c.urdf_text = read_text_file(p.string());
    c.urdf_dir = p.parent_path().string();
  }
  c.ee_link = j.value("ee_link", std::string("grasp_frame"));
  if (j.contains("home")) c.home = joint_config_from_json(j.at("home"));
  if (j.contains("gripper")) c.gripper = gripper_map_from_json(j.at("gripper"));
  if (j.contains("flange_to_grasp"))
    c.flange_to_grasp = pose_from_json(j.at("flange_to_grasp"), "flange_to_grasp");
  return c;
}

inline json rig_to_json(const RobotRig& rig) {
  return {{"arm", arm_config_to_json(rig.arm)},
          {"base_left", pose_to_json(rig.base_left)},
          {"base_right", pose_to_json(rig.base_right)}};
}

inline RobotRig rig_from_json(const json& j, const std::string& base_dir = "") {
  RobotRig rig;
  rig.arm = arm_config_from_json(j.at("arm"), base_dir);
  rig.base_left = pose_from_json(j.at("base_left"), "base_left");
  rig.base_right = pose_from_json(j.at("base_right"), "base_right");
  return rig;
}

struct RetargetParams {
  double threshold = 0.35;        // radians; closed strictly below
  double hysteresis_band = 0.05;  // radians
  int min_hold = 3;               // frames between gripper state changes
  Se3Pose grasp_offset;           // wrist frame -> gripper grasp frame
};

struct CrosspaintParams {
  int dilation_px = 3;
  std::string inpainter = "background_plate";  // or "diffuse_fill"
  double brightness_lo = 0.8;
  double brightness_hi = 1.2;
  bool z_test = false;         // optional depth test during overlay
  bool drop_flagged = true;    // drop IK/registration-flagged frames on export
  double open_width = 0.08;    // binary open -> commanded width, meters
  double closed_width = 0.0;
  double tau_bg = 0.01;        // depth-threshold segmenter contrast, meters
  // when set and differing from the source camera, frames are reprojected
  // into this view before painting
  std::optional<json> target_camera;

  void validate() const {
    if (dilation_px < 0 || dilation_px > 50)
      raise(ErrorCode::ConfigError, "dilation_px must be within [0, 50]");
    if (!(brightness_lo > 0) || brightness_lo > brightness_hi)
      raise(ErrorCode::ConfigError, "brightness range must satisfy 0 < lo <= hi");
    if (inpainter != "background_plate" && inpainter != "diffuse_fill")
      raise(ErrorCode::ConfigError, "unknown inpainter " + inpainter);
  }
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  RetargetParams retarget;
  IcpParams icp;
  IkParams ik;
  CrosspaintParams crosspaint;
  int jobs = 0;  // 0 = hardware concurrency

  PipelineConfig() {
    icp.corr_dist = 0.10;  // hand-scale gate; the bias to remove is ~4 cm
    icp.max_iters = 100;
  }
};

inline json pipeline_config_to_json(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"jobs", c.jobs},
          {"retarget",
           {{"threshold", c.retarget.threshold},
            {"hysteresis_band", c.retarget.hysteresis_band},
            {"min_hold", c.retarget.min_hold},
            {"grasp_offset", pose_to_json(c.retarget.grasp_offset)}}},
          {"icp",
           {{"max_iters", c.icp.max_iters},
            {"corr_dist", c.icp.corr_dist},
            {"converge_eps", c.icp.converge_eps},
            {"point_to_plane", c.icp.point_to_plane},
            {"restarts", c.icp.restarts},
            {"restart_rmse", c.icp.restart_rmse},
            {"polish_rounds", c.icp.polish_rounds}}},
          {"ik",
           {{"damping", c.ik.damping},
            {"max_iters", c.ik.max_iters},
            {"pos_tol", c.ik.pos_tol},
            {"rot_tol", c.ik.rot_tol}}},
          {"crosspaint",
           {{"dilation_px", c.crosspaint.dilation_px},
            {"inpainter", c.crosspaint.inpainter},
            {"brightness", {c.crosspaint.brightness_lo, c.crosspaint.brightness_hi}},
            {"z_test", c.crosspaint.z_test},
            {"drop_flagged", c.crosspaint.drop_flagged},
            {"open_width", c.crosspaint.open_width},
            {"closed_width", c.crosspaint.closed_width},
            {"tau_bg", c.crosspaint.tau_bg},
            {"target_camera", c.crosspaint.target_camera
                                  ? *c.crosspaint.target_camera
                                  : json(nullptr)}}}};
}

inline PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("retarget")) {
      const auto& r = j.at("retarget");
      c.retarget.threshold = r.value("threshold", c.retarget.threshold);
      c.retarget.hysteresis_band =
          r.value("hysteresis_band", c.retarget.hysteresis_band);
      c.retarget.min_hold = r.value("min_hold", c.retarget.min_hold);
      if (r.contains("grasp_offset"))
        c.retarget.grasp_offset =
            pose_from_json(r.at("grasp_offset"), "retarget.grasp_offset");
    }
    if (j.contains("icp")) {
      const auto& i = j.at("icp");
      c.icp.max_iters = i.value("max_iters", c.icp.max_iters);
      c.icp.corr_dist = i.value("corr_dist", c.icp.corr_dist);
      c.icp.converge_eps = i.value("converge_eps", c.icp.converge_eps);
      c.icp.point_to_plane = i.value("point_to_plane", c.icp.point_to_plane);
      c.icp.restarts = i.value("restarts", c.icp.restarts);
      c.icp.restart_rmse = i.value("restart_rmse", c.icp.restart_rmse);
      c.icp.polish_rounds = i.value("polish_rounds", c.icp.polish_rounds);
    }
    if (j.contains("ik")) {
      const auto& k = j.at("ik");
      c.ik.damping = k.value("damping", c.ik.damping);
      c.ik.max_iters = k.value("max_iters", c.ik.max_iters);
      c.ik.pos_tol = k.value("pos_tol", c.ik.pos_tol);
      c.ik.rot_tol = k.value("rot_tol", c.ik.rot_tol);
    }
    if (j.contains("crosspaint")) {
      const auto& x = j.at("crosspaint");
      c.crosspaint.dilation_px = x.value("dilation_px", c.crosspaint.dilation_px);
      c.crosspaint.inpainter = x.value("inpainter", c.crosspaint.inpainter);
      if (x.contains("brightness")) {
        c.crosspaint.brightness_lo = x.at("brightness").at(0);
        c.crosspaint.brightness_hi = x.at("brightness").at(1);
      }
      c.crosspaint.z_test = x.value("z_test", c.crosspaint.z_test);
      c.crosspaint.drop_flagged = x.value("drop_flagged", c.crosspaint.drop_flagged);
      c.crosspaint.open_width = x.value("open_width", c.crosspaint.open_width);
      c.crosspaint.closed_width = x.value("closed_width", c.crosspaint.closed_width);
      c.crosspaint.tau_bg = x.value("tau_bg", c.crosspaint.tau_bg);
      if (x.contains("target_camera") && !x.at("target_camera").is_null())
        c.crosspaint.target_camera = x.at("target_camera");
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("pipeline config: ") + e.what());
  }
  c.crosspaint.validate();
  return c;
}

/// Stable hash over the fully materialized config (defaults included), so a
/// changed threshold always changes exported lineage.
inline std::string pipeline_config_hash(const PipelineConfig& c) {
  return json_hash(pipeline_config_to_json(c));
}

}  // namespace duopaint
