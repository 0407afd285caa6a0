#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "duopaint/config.hpp"
#include "duopaint/dataset.hpp"
#include "duopaint/hand.hpp"
#include "duopaint/io_png.hpp"
#include "duopaint/render.hpp"
#include "duopaint/rng.hpp"
#include "duopaint/urdf.hpp"

namespace duopaint {

// Synthetic episode generation: scripted robot joint trajectories plus a
// scripted hand, rendered with known masks and depth. Everything downstream
// (refinement, retargeting, cross-painting) can be checked against the
// sidecar ground truth these scenes carry.

constexpr std::uint16_t kPlaneId = 1;
constexpr std::uint16_t kRobotIdBase = 10;
constexpr std::uint16_t kHandId = 200;

inline const Vec3 kDefaultLight = Vec3(0.3, -0.5, -0.8).normalized();

struct SynthNoise {
  double sigma_pos = 0.0;         // iid landmark noise, meters
  double bias_translation = 0.0;  // rigid bias magnitude, meters
  double bias_rotation = 0.0;     // rigid bias magnitude, radians
};

struct BackgroundSpec {
  double size_x = 2.0;
  double size_y = 1.6;
  int cells = 16;
  Vec3 center = Vec3(0, 0.3, 0);
  Vec3 color_a = Vec3(0.82, 0.78, 0.70);
  Vec3 color_b = Vec3(0.42, 0.46, 0.52);
};

/// One scripted episode: per-frame joint configs for the source robot and a
/// per-frame wrist pose + pincer angle for the hand proxy.
struct EpisodeScript {
  std::uint64_t seed = 1;
  std::string id = "demo_0000";
  Side robot_side = Side::Left;
  double fps = 15.0;
  Camera camera;
  BackgroundSpec background;
  SynthNoise noise;
  std::vector<JointConfig> joints;       // per frame, source arm
  std::vector<double> gripper_width;     // per frame, commanded width
  std::vector<Se3Pose> wrist_poses;      // per frame, world
  std::vector<double> pincer_angles;     // per frame, radians

  int frame_count() const { return static_cast<int>(joints.size()); }

  void validate(const KinematicChain& chain) const {
    if (joints.empty()) raise(ErrorCode::ConfigError, "script has no frames");
    if (joints.size() != gripper_width.size() ||
        joints.size() != wrist_poses.size() ||
        joints.size() != pincer_angles.size())
      raise(ErrorCode::ConfigError, "script arrays differ in length");
    for (const auto& q : joints)
      if (!chain.within_limits(q))
        raise(ErrorCode::ConfigError, "scripted joints outside limits");
  }
};

inline Camera default_synth_camera(int width = 640, int height = 480) {
  Camera cam;
  cam.intrinsics = {0.9 * width, 0.9 * width, (width - 1) / 2.0,
                    (height - 1) / 2.0, width, height};
  cam.extrinsic = look_at_extrinsic(Vec3(0, -0.9, 0.85), Vec3(0, 0.25, 0.05));
  return cam;
}

/// Rigid bias about the keypoint centroid, magnitudes fixed and directions
/// drawn from the episode stream; models a monocular absolute-pose error.
struct RigidBias {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
};

inline RigidBias sample_rigid_bias(const SynthNoise& noise, Rng& rng) {
  RigidBias b;
  if (noise.bias_rotation > 0)
    b.rotation = Quat(Eigen::AngleAxisd(noise.bias_rotation, rng.unit_vector()));
  if (noise.bias_translation > 0)
    b.translation = noise.bias_translation * rng.unit_vector();
  return b;
}

/// Applies the per-episode rigid bias (rotation about the landmark centroid
/// plus translation) then iid Gaussian noise per landmark.
inline HandKeypoints perturb_keypoints(const HandKeypoints& gt, double sigma_pos,
                                       const RigidBias& bias, Rng& rng) {
  HandKeypoints out = gt;
  Vec3 c = Vec3::Zero();
  for (const auto& p : gt.landmarks) c += p;
  c /= 21.0;
  for (auto& p : out.landmarks)
    p = bias.rotation * (p - c) + c + bias.translation;
  if (sigma_pos > 0)
    for (auto& p : out.landmarks) p += rng.normal3(sigma_pos);
  return out;
}

// --- scripted motion generation ----------------------------------------------

struct ScriptParams {
  std::string task = "lift_box";
  std::uint64_t seed = 1;
  int episodes = 2;
  int frames = 30;
  double fps = 15.0;
  int image_width = 640;
  int image_height = 480;
  SynthNoise noise;
  RobotRig rig;  // source robot
  std::optional<Camera> camera;

  ScriptParams() { rig = default_source_rig(); }
};

namespace detail {

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

inline JointConfig lerp_config(const JointConfig& a, const JointConfig& b,
                               double t) {
  JointConfig out;
  for (const auto& [name, va] : a.values)
    out.set(name, va + t * (b.at(name) - va));
  return out;
}

/// Workspace box for one side of the table, world frame.
inline Vec3 sample_box(Rng& rng, Side side, double z_lo = 0.10,
                       double z_hi = 0.28) {
  double x = rng.uniform(0.10, 0.30);
  if (side == Side::Left) x = -x;
  return Vec3(x, rng.uniform(0.14, 0.36), rng.uniform(z_lo, z_hi));
}

/// Tool-down orientation with bounded random yaw and tilt.
inline Quat sample_tool_down(Rng& rng) {
  return Quat(Eigen::AngleAxisd(rng.uniform(-0.4, 0.4), Vec3::UnitZ()) *
              Eigen::AngleAxisd(M_PI, Vec3::UnitY()) *
              Eigen::AngleAxisd(rng.uniform(-0.2, 0.2), Vec3::UnitX()));
}

}  // namespace detail

/// Builds one episode script: three reachable EE waypoints joined by smooth
/// joint interpolation, a close-then-hold gripper schedule, and a hand
/// trajectory mirrored onto the other side with a matched pinch schedule.
inline EpisodeScript make_episode_script(const ScriptParams& params,
                                         int episode_index,
                                         const KinematicChain& chain) {
  EpisodeScript script;
  script.seed = Rng::mix(params.seed, episode_index);
  Rng rng(script.seed);
  char buf[32];
  std::snprintf(buf, sizeof buf, "demo_%04d", episode_index);
  script.id = buf;
  script.robot_side = episode_index % 2 == 0 ? Side::Left : Side::Right;
  script.fps = params.fps;
  script.camera = params.camera
                      ? *params.camera
                      : default_synth_camera(params.image_width,
                                             params.image_height);
  script.noise = params.noise;

  const Se3Pose& base = params.rig.base(script.robot_side);
  Side hand_side = other_side(script.robot_side);

  // robot: three IK waypoints, resampled deterministically until reachable
  std::vector<JointConfig> waypoints;
  JointConfig seed_cfg = params.rig.arm.home;
  for (int w = 0; w < 3; ++w) {
    IkResult ik;
    for (int attempt = 0; attempt < 20; ++attempt) {
      Se3Pose target(detail::sample_box(rng, script.robot_side),
                     detail::sample_tool_down(rng));
      Se3Pose flange_target =
          compose(target, invert(params.rig.arm.flange_to_grasp));
      ik = solve_ik(chain, flange_target, seed_cfg, {}, base);
      if (ik.converged) break;
    }
    if (!ik.converged)
      raise(ErrorCode::ConfigError,
            "could not find reachable scripted waypoints; check rig bases");
    waypoints.push_back(ik.joints);
    seed_cfg = ik.joints;
  }

  // hand: waypoints on the opposite side, fingers toward the table center
  Quat hand_base_rot =
      hand_side == Side::Right
          ? Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitZ()))  // fingers -> -x
          : Quat::Identity();                             // fingers -> +x
  std::vector<Se3Pose> hand_waypoints;
  for (int w = 0; w < 3; ++w) {
    Quat wobble(Eigen::AngleAxisd(rng.uniform(-0.25, 0.25), Vec3::UnitZ()) *
                Eigen::AngleAxisd(rng.uniform(-0.2, 0.2), Vec3::UnitY()));
    hand_waypoints.emplace_back(detail::sample_box(rng, hand_side, 0.12, 0.30),
                                (hand_base_rot * wobble).normalized());
  }

  const int n = std::max(2, params.frames);
  const double open_w = 0.07, closed_w = 0.022;
  const double pinch_open = 0.70, pinch_closed = 0.16;
  for (int i = 0; i < n; ++i) {
    double t = double(i) / (n - 1);
    int seg = t < 0.5 ? 0 : 1;
    double s = detail::smoothstep(seg == 0 ? t / 0.5 : (t - 0.5) / 0.5);
    JointConfig q =
        detail::lerp_config(waypoints[seg], waypoints[seg + 1], s);

    // grip schedule: open, ramp closed over [0.35, 0.5], hold
    double width = open_w;
    if (t >= 0.5)
      width = closed_w;
    else if (t > 0.35)
      width = open_w + (closed_w - open_w) * (t - 0.35) / 0.15;
    for (const auto& [name, v] :
         gripper_width_to_joints(chain, params.rig.arm.gripper, width).values)
      q.set(name, v);
    script.joints.push_back(q);
    script.gripper_width.push_back(width);

    Se3Pose w0 = hand_waypoints[seg], w1 = hand_waypoints[seg + 1];
    script.wrist_poses.emplace_back(
        w0.t + s * (w1.t - w0.t), w0.q.slerp(s, w1.q));
    double pinch = pinch_open;
    if (t >= 0.5)
      pinch = pinch_closed;
    else if (t > 0.35)
      pinch = pinch_open + (pinch_closed - pinch_open) * (t - 0.35) / 0.15;
    script.pincer_angles.push_back(pinch);
  }
  return script;
}

// --- episode generation --------------------------------------------------------

struct GroundTruthFrame {
  Se3Pose wrist_pose;       // world
  double pincer_angle = 0;
  Se3Pose robot_ee;         // world, grasp frame
  JointConfig robot_joints;
  double gripper_width = 0;
  HandKeypoints keypoints_cam;  // exact, camera frame
};

struct SynthEpisode {
  Demonstration demo;
  std::vector<GroundTruthFrame> ground_truth;
};

inline TriangleMesh background_mesh(const BackgroundSpec& bg) {
  TriangleMesh plane = make_checker_plane(bg.size_x, bg.size_y, bg.cells,
                                          bg.color_a, bg.color_b);
  return transform_mesh(Se3Pose(bg.center, Quat::Identity()), plane);
}

inline void write_plates(const std::string& root, const std::string& cam_name,
                         const Camera& cam, const BackgroundSpec& bg) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(root) / ("cam_" + cam_name));
  std::vector<MeshInstance> scene;
  scene.push_back({background_mesh(bg), Se3Pose::identity(), kPlaneId});
  RenderOutput plate = render_scene(scene, cam, kDefaultLight);
  auto dir = fs::path(root) / ("cam_" + cam_name);
  write_rgb_png((dir / "plate_rgb.png").string(), plate.rgb);
  write_depth_png((dir / "plate_depth.png").string(), plate.depth);
}

/// Renders one scripted episode into `<root>/demos/<id>/` and returns the
/// Demonstration plus exact ground truth. Observation images, ground-truth
/// masks, and the sidecar are written; the caller assembles the manifest.
inline SynthEpisode generate_episode(const EpisodeScript& script,
                                     const RobotRig& rig,
                                     const RobotModel& model,
                                     const std::string& root,
                                     const std::string& cam_name = "fixed") {
  namespace fs = std::filesystem;
  script.validate(model.chain);
  const Se3Pose& base = rig.base(script.robot_side);
  Side hand_side = other_side(script.robot_side);
  Rng rng(Rng::mix(script.seed, 0x9d));
  RigidBias bias = sample_rigid_bias(script.noise, rng);

  SynthEpisode out;
  out.demo.id = script.id;
  out.demo.robot_side = script.robot_side;
  out.demo.success = true;

  std::string demo_dir = "demos/" + script.id;
  fs::path cam_dir = fs::path(root) / demo_dir / ("cam_" + cam_name);
  fs::create_directories(cam_dir);

  TriangleMesh bg = background_mesh(script.background);
  const Se3Pose cam_from_world = script.camera.extrinsic;
  const int n = script.frame_count();
  const double binary_cut = 0.5 * (0.07 + 0.022);

  std::ofstream gt_file(fs::path(root) / demo_dir / "ground_truth.jsonl",
                        std::ios::binary | std::ios::trunc);
  if (!gt_file) raise(ErrorCode::IoError, "cannot write ground truth sidecar");

  for (int i = 0; i < n; ++i) {
    const JointConfig& q = script.joints[i];
    const Se3Pose& wrist = script.wrist_poses[i];
    double pinch = script.pincer_angles[i];

    // scene: plane + robot + hand proxy
    std::vector<MeshInstance> scene;
    scene.push_back({bg, Se3Pose::identity(), kPlaneId});
    append_robot_instances(scene, model, q, base, kRobotIdBase);
    scene.push_back({hand_template_mesh(pinch, hand_side), wrist, kHandId});
    RenderOutput render = render_scene(scene, script.camera, kDefaultLight);

    // masks for the sidecar
    MaskImage robot_mask(render.instance_mask.width, render.instance_mask.height, 0);
    MaskImage hand_mask(render.instance_mask.width, render.instance_mask.height, 0);
    for (std::size_t p = 0; p < render.instance_mask.data.size(); ++p) {
      std::uint16_t id = render.instance_mask.data[p];
      if (id >= kRobotIdBase && id < kHandId) robot_mask.data[p] = 255;
      if (id == kHandId) hand_mask.data[p] = 255;
    }

    char fr[16];
    std::snprintf(fr, sizeof fr, "%06d", i);
    std::string rgb_rel = "cam_" + cam_name + "/rgb_" + fr + ".png";
    std::string depth_rel = "cam_" + cam_name + "/depth_" + fr + ".png";
    write_rgb_png((fs::path(root) / demo_dir / rgb_rel).string(), render.rgb);
    write_depth_png((fs::path(root) / demo_dir / depth_rel).string(), render.depth);
    write_mask_png((cam_dir / ("gt_robot_" + std::string(fr) + ".png")).string(),
                   robot_mask);
    write_mask_png((cam_dir / ("gt_hand_" + std::string(fr) + ".png")).string(),
                   hand_mask);

    // ground truth
    GroundTruthFrame gt;
    gt.wrist_pose = wrist;
    gt.pincer_angle = pinch;
    gt.robot_joints = q;
    gt.robot_ee = compose(fk_link(model.chain, q, rig.arm.ee_link, base),
                          rig.arm.flange_to_grasp);
    gt.gripper_width = script.gripper_width[i];
    HandKeypoints kp_world = pose_hand(wrist, pinch, hand_side);
    gt.keypoints_cam = transform_keypoints(cam_from_world, kp_world);
    out.ground_truth.push_back(gt);

    // demonstration frame; hand_state carries the perturbed keypoints
    TrajectoryFrame frame;
    frame.timestamp = double(i) / script.fps;
    frame.observations[cam_name] = {rgb_rel, depth_rel};
    frame.robot_state.pose = gt.robot_ee;
    frame.robot_state.gripper_width = gt.gripper_width;
    frame.robot_joints = q;
    frame.hand_state =
        perturb_keypoints(gt.keypoints_cam, script.noise.sigma_pos, bias, rng);
    out.demo.frames.push_back(std::move(frame));

    json gt_line = {{"frame", i},
                    {"wrist_pose", pose_to_json(gt.wrist_pose)},
                    {"pincer", gt.pincer_angle},
                    {"robot_ee", pose_to_json(gt.robot_ee)},
                    {"robot_joints", joint_config_to_json(gt.robot_joints)},
                    {"gripper_width", gt.gripper_width},
                    {"keypoints_cam", keypoints_to_json(gt.keypoints_cam)}};
    gt_file << gt_line.dump() << "\n";
  }

  // actions: commanded next state (last frame holds)
  for (int i = 0; i < n; ++i) {
    int next = std::min(i + 1, n - 1);
    EndEffectorAction act;
    act.pose = out.demo.frames[next].robot_state.pose;
    act.width = out.demo.frames[next].robot_state.gripper_width;
    act.gripper = act.width < binary_cut ? GripperState::Closed
                                         : GripperState::Open;
    act.provenance = Provenance::Robot;
    out.demo.frames[i].robot_action = act;
  }
  return out;
}

/// Whole-dataset generation: plates, episodes with alternating sides, and
/// the manifest. Deterministic for a given ScriptParams.
inline SourceDataset generate_dataset(const ScriptParams& params,
                                      const std::string& out_root) {
  KinematicChain chain = parse_urdf(params.rig.arm.urdf_text);
  chain.ee_link = params.rig.arm.ee_link;
  RobotModel model = RobotModel::build(chain, params.rig.arm.urdf_dir);

  SourceDataset ds;
  ds.info.root = out_root;
  ds.info.kind = "source";
  ds.info.task = params.task;
  Camera cam = params.camera ? *params.camera
                             : default_synth_camera(params.image_width,
                                                    params.image_height);
  ds.info.cameras["fixed"] = cam;
  ds.info.robots = {{"source", rig_to_json(params.rig)}};

  BackgroundSpec bg;
  write_plates(out_root, "fixed", cam, bg);

  for (int e = 0; e < params.episodes; ++e) {
    EpisodeScript script = make_episode_script(params, e, chain);
    script.camera = cam;
    script.background = bg;
    SynthEpisode episode = generate_episode(script, params.rig, model, out_root);
    ds.demos.push_back(std::move(episode.demo));
  }
  export_source(out_root, ds.info, ds.demos,
                {{"generator", "synth"}, {"seed", params.seed}});
  return ds;
}

/// Script file surface: top-level generation parameters, with an optional
/// camera override and robot rig.
inline ScriptParams script_params_from_json(const json& j,
                                            const std::string& base_dir = "") {
  ScriptParams p;
  try {
    p.task = j.value("task", p.task);
    p.seed = j.value("seed", p.seed);
    p.episodes = j.value("episodes", p.episodes);
    p.frames = j.value("frames", p.frames);
    p.fps = j.value("fps", p.fps);
    if (j.contains("image")) {
      p.image_width = j.at("image").value("width", p.image_width);
      p.image_height = j.at("image").value("height", p.image_height);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      p.noise.sigma_pos = n.value("sigma_pos", 0.0);
      p.noise.bias_translation = n.value("bias_translation", 0.0);
      p.noise.bias_rotation =
          n.value("bias_rotation_deg", 0.0) * M_PI / 180.0;
    }
    if (j.contains("robot")) p.rig = rig_from_json(j.at("robot"), base_dir);
    if (j.contains("camera")) p.camera = camera_from_json(j.at("camera"));
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("synth script: ") + e.what());
  }
  if (p.episodes < 1 || p.frames < 1)
    raise(ErrorCode::ConfigError, "script needs episodes >= 1 and frames >= 1");
  return p;
}

/// Ground-truth sidecar reader.
inline std::vector<GroundTruthFrame> load_ground_truth(
    const std::string& demo_dir) {
  auto path = std::filesystem::path(demo_dir) / "ground_truth.jsonl";
  if (!std::filesystem::exists(path)) return {};
  std::vector<GroundTruthFrame> out;
  for (const auto& j : detail::read_jsonl(path.string())) {
    GroundTruthFrame gt;
    gt.wrist_pose = pose_from_json(j.at("wrist_pose"), "ground truth wrist");
    gt.pincer_angle = j.at("pincer");
    gt.robot_ee = pose_from_json(j.at("robot_ee"), "ground truth robot ee");
    gt.robot_joints = joint_config_from_json(j.at("robot_joints"));
    gt.gripper_width = j.at("gripper_width");
    const json& kp = j.at("keypoints_cam");
    gt.keypoints_cam.side = side_from_string(kp.at("side"));
    for (int k = 0; k < 21; ++k)
      gt.keypoints_cam.landmarks[k] =
          Vec3(kp.at("landmarks")[k][0], kp.at("landmarks")[k][1],
               kp.at("landmarks")[k][2]);
    out.push_back(std::move(gt));
  }
  return out;
}

}  // namespace duopaint
