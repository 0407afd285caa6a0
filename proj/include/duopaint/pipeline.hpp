#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>

#include "duopaint/crosspaint.hpp"
#include "duopaint/dataset.hpp"
#include "duopaint/synth.hpp"

namespace duopaint {

/// Distributes whole trajectories across workers. Work is indexed so output
/// is byte-identical regardless of scheduling; exceptions rethrow on the
/// caller thread.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct StageReport {
  int demos = 0;
  int frames = 0;
  int flagged = 0;
  int dropped = 0;
};

namespace detail {

inline void copy_file_into(const std::filesystem::path& src,
                           const std::filesystem::path& dst) {
  std::filesystem::create_directories(dst.parent_path());
  std::filesystem::copy_file(src, dst,
                             std::filesystem::copy_options::overwrite_existing);
}

inline void copy_demo_images(const std::string& in_root,
                             const std::string& out_root,
                             const Demonstration& demo,
                             const std::string& cam_name) {
  namespace fs = std::filesystem;
  fs::path in_demo = fs::path(in_root) / "demos" / demo.id;
  fs::path out_demo = fs::path(out_root) / "demos" / demo.id;
  for (std::size_t i = 0; i < demo.frames.size(); ++i) {
    for (const auto& [cam, ref] : demo.frames[i].observations) {
      copy_file_into(in_demo / ref.rgb, out_demo / ref.rgb);
      copy_file_into(in_demo / ref.depth, out_demo / ref.depth);
    }
    char fr[16];
    std::snprintf(fr, sizeof fr, "%06d", static_cast<int>(i));
    for (const char* stem : {"gt_robot_", "gt_hand_"}) {
      fs::path mask = in_demo / ("cam_" + cam_name) /
                      (stem + std::string(fr) + ".png");
      if (fs::exists(mask))
        copy_file_into(mask, out_demo / ("cam_" + cam_name) /
                                 (stem + std::string(fr) + ".png"));
    }
  }
  fs::path gt = in_demo / "ground_truth.jsonl";
  if (fs::exists(gt)) copy_file_into(gt, out_demo / "ground_truth.jsonl");
}

inline void copy_plates(const std::string& in_root, const std::string& out_root,
                        const std::string& cam_name) {
  namespace fs = std::filesystem;
  for (const char* name : {"plate_rgb.png", "plate_depth.png"}) {
    fs::path src = fs::path(in_root) / ("cam_" + cam_name) / name;
    if (fs::exists(src))
      copy_file_into(src, fs::path(out_root) / ("cam_" + cam_name) / name);
  }
}

inline std::optional<MaskImage> load_gt_mask(const std::string& root,
                                             const std::string& demo_id,
                                             const std::string& cam_name,
                                             const char* stem, int frame) {
  namespace fs = std::filesystem;
  char fr[16];
  std::snprintf(fr, sizeof fr, "%06d", frame);
  fs::path p = fs::path(root) / "demos" / demo_id / ("cam_" + cam_name) /
               (stem + std::string(fr) + ".png");
  if (!fs::exists(p)) return std::nullopt;
  return read_mask_png(p.string());
}

/// Point cloud of masked depth pixels, camera frame.
inline PointCloud cloud_from_mask(const DepthImage& depth,
                                  const CameraIntrinsics& intr,
                                  const MaskImage& mask) {
  PointCloud cloud;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!mask.at(x, y)) continue;
      float d = depth.at(x, y);
      if (!(d > 0)) continue;
      cloud.points.push_back(backproject(intr, Vec2(x, y), d));
    }
  return cloud;
}

/// Hand segmentation for refinement: ground-truth mask when the dataset
/// carries one, otherwise depth threshold against the plate minus the
/// rendered source robot, restricted to a box around the predicted hand.
inline MaskImage hand_mask_for_frame(
    const std::string& root, const Demonstration& demo, int frame_idx,
    const std::string& cam_name, const Camera& cam, const DepthImage& depth,
    const BackgroundPlate* plate, double tau_bg,
    const RobotModel* source_model, const Se3Pose& source_base,
    const HandKeypoints& kp_cam) {
  if (auto gt = load_gt_mask(root, demo.id, cam_name, "gt_hand_", frame_idx))
    return *gt;
  if (!plate)
    raise(ErrorCode::BackgroundMissing,
          "no ground-truth hand mask and no background plate for depth "
          "threshold segmentation");
  MaskImage robot_mask(depth.width, depth.height, 0);
  const TrajectoryFrame& frame = demo.frames[frame_idx];
  if (source_model && frame.robot_joints)
    robot_mask = dilate(
        segment_embodiment_robot(*source_model, *frame.robot_joints,
                                 source_base, cam)
            .mask,
        2);
  DepthSegmentParams params;
  params.tau_bg = tau_bg;
  SegmentationMask fg =
      segment_embodiment_depth(depth, cam, plate, params, &robot_mask);
  // keep only pixels near the predicted hand (bias included); the rest of
  // the foreground belongs to scene objects
  Vec3 center = Vec3::Zero();
  for (const auto& p : kp_cam.landmarks) center += p;
  center /= 21.0;
  const double radius = 0.22;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!fg.mask.at(x, y)) continue;
      Vec3 p = backproject(cam.intrinsics, Vec2(x, y), depth.at(x, y));
      if ((p - center).norm() > radius) fg.mask.at(x, y) = 0;
    }
  return fg.mask;
}

}  // namespace detail

/// Fills human_action for every frame of every demo: refine keypoints
/// against the segmented depth cloud, build the wrist frame, apply the
/// grasp offset, and threshold the pincer angle with hysteresis. Writes a
/// full copy of the dataset plus per-demo fidelity reports.
inline StageReport retarget_stage(const std::string& in_root,
                                  const PipelineConfig& cfg,
                                  const std::string& out_root,
                                  int jobs = 0) {
  namespace fs = std::filesystem;
  SourceDataset ds = load_dataset(in_root);
  if (ds.info.cameras.empty())
    raise(ErrorCode::ManifestError, "dataset has no camera calibration");
  const std::string cam_name = ds.info.cameras.begin()->first;
  const Camera cam = ds.info.cameras.begin()->second;
  auto plate_opt = load_plate(in_root, cam_name);
  const BackgroundPlate* plate = plate_opt ? &*plate_opt : nullptr;

  std::optional<RobotRig> source_rig;
  std::optional<RobotModel> source_model;
  if (ds.info.robots.contains("source")) {
    source_rig = rig_from_json(ds.info.robots.at("source"), in_root);
    KinematicChain chain = parse_urdf(source_rig->arm.urdf_text);
    chain.ee_link = source_rig->arm.ee_link;
    source_model = RobotModel::build(chain, source_rig->arm.urdf_dir);
  }

  fs::create_directories(out_root);
  detail::copy_plates(in_root, out_root, cam_name);

  StageReport report;
  report.demos = static_cast<int>(ds.demos.size());
  std::mutex report_mu;

  parallel_for(static_cast<int>(ds.demos.size()), jobs, [&](int di) {
    Demonstration& demo = ds.demos[di];
    Se3Pose source_base =
        source_rig ? source_rig->base(demo.robot_side) : Se3Pose::identity();
    Se3Pose world_from_cam = invert(cam.extrinsic);

    std::vector<double> angles(demo.frames.size(), cfg.retarget.threshold + 1);
    std::vector<Se3Pose> wrists(demo.frames.size());
    std::vector<FidelityRecord> fidelity;
    int flagged = 0;

    for (std::size_t i = 0; i < demo.frames.size(); ++i) {
      TrajectoryFrame& frame = demo.frames[i];
      FidelityRecord rec;
      rec.frame = static_cast<int>(i);
      rec.pass = "retarget";
      if (!frame.hand_state) {
        frame.hand_low_fidelity = true;
        rec.flagged = true;
        rec.reason = "SourceUnavailable: no hand keypoints";
        fidelity.push_back(rec);
        ++flagged;
        continue;
      }
      HandKeypoints kp = *frame.hand_state;
      const auto& ref = frame.observations.at(cam_name);
      DepthImage depth = read_depth_png(
          (fs::path(in_root) / "demos" / demo.id / ref.depth).string());

      try {
        MaskImage hand_mask = detail::hand_mask_for_frame(
            in_root, demo, static_cast<int>(i), cam_name, cam, depth, plate,
            cfg.crosspaint.tau_bg, source_model ? &*source_model : nullptr,
            source_base, kp);
        PointCloud depth_cloud =
            detail::cloud_from_mask(depth, cam.intrinsics, hand_mask);
        auto obs = observation_from_keypoints(kp);
        RefineResult refined =
            refine_keypoints(kp, obs.mesh_vertices, depth_cloud, cfg.icp);
        kp = refined.keypoints;
        rec.icp_rmse = refined.icp.rmse;
      } catch (const Error& e) {
        frame.hand_low_fidelity = true;
        rec.flagged = true;
        rec.reason = e.what();
        ++flagged;
      }

      try {
        Se3Pose wrist_cam = wrist_frame(kp);
        wrists[i] = compose(world_from_cam, wrist_cam);
        angles[i] = gripper_angle(kp);
        frame.hand_state = kp;  // refined keypoints replace the estimate
      } catch (const Error& e) {
        frame.hand_low_fidelity = true;
        if (!rec.flagged) {
          rec.flagged = true;
          rec.reason = e.what();
          ++flagged;
        }
      }
      fidelity.push_back(rec);
    }

    auto states = apply_gripper_hysteresis(angles, cfg.retarget.threshold,
                                           cfg.retarget.hysteresis_band,
                                           cfg.retarget.min_hold);
    for (std::size_t i = 0; i < demo.frames.size(); ++i) {
      if (demo.frames[i].hand_low_fidelity && !demo.frames[i].hand_state)
        continue;
      EndEffectorAction act;
      act.pose = compose(wrists[i], cfg.retarget.grasp_offset);
      act.gripper = states[i];
      act.provenance = Provenance::HumanRetargeted;
      act.width = -1.0;  // binary only; width exported as null
      demo.frames[i].human_action = act;
    }

    detail::copy_demo_images(in_root, out_root, demo, cam_name);
    json fj = json::array();
    for (const auto& r : fidelity) fj.push_back(fidelity_to_json(r));
    fs::create_directories(fs::path(out_root) / "demos" / demo.id);
    write_text_file((fs::path(out_root) / "demos" / demo.id /
                     "retarget_fidelity.json")
                        .string(),
                    json({{"frames", fj}, {"flagged", flagged}}).dump(2) + "\n");

    std::lock_guard lock(report_mu);
    report.frames += static_cast<int>(demo.frames.size());
    report.flagged += flagged;
  });

  json lineage = {{"stage", "retarget"},
                  {"config_hash", pipeline_config_hash(cfg)},
                  {"source_manifest",
                   file_hash((fs::path(in_root) / "manifest.json").string())}};
  export_source(out_root, ds.info, ds.demos, lineage);
  return report;
}

/// Robot->robot and human->robot cross-painting into a mixed bimanual
/// dataset. Observations are re-painted; actions/states mixed per side;
/// flagged frames dropped per config.
inline StageReport crosspaint_stage(const std::string& in_root,
                                    const RobotRig& target_rig,
                                    const PipelineConfig& cfg,
                                    const std::string& out_root,
                                    int jobs = 0) {
  namespace fs = std::filesystem;
  cfg.crosspaint.validate();
  SourceDataset ds = load_dataset(in_root);
  if (ds.info.cameras.empty())
    raise(ErrorCode::ManifestError, "dataset has no camera calibration");
  const std::string cam_name = ds.info.cameras.begin()->first;
  const Camera source_cam = ds.info.cameras.begin()->second;

  Camera paint_cam = source_cam;
  bool reproject = false;
  if (cfg.crosspaint.target_camera) {
    Camera tc = camera_from_json(*cfg.crosspaint.target_camera);
    if (translation_distance(tc.extrinsic, source_cam.extrinsic) > 1e-12 ||
        rotation_distance(tc.extrinsic, source_cam.extrinsic) > 1e-12) {
      paint_cam = tc;
      reproject = true;
    }
  }

  auto plate_opt = load_plate(in_root, cam_name);
  std::optional<BackgroundPlate> plate_reproj;
  if (reproject && plate_opt) {
    auto re = reproject_depth_image(plate_opt->rgb, plate_opt->depth,
                                    source_cam, paint_cam);
    plate_reproj = BackgroundPlate{std::move(re.rgb), std::move(re.depth)};
  }
  const BackgroundPlate* plate =
      reproject ? (plate_reproj ? &*plate_reproj : nullptr)
                : (plate_opt ? &*plate_opt : nullptr);

  // source robot model for segmentation and IK fallback
  std::optional<RobotRig> source_rig;
  std::optional<RobotModel> source_model;
  if (ds.info.robots.contains("source")) {
    source_rig = rig_from_json(ds.info.robots.at("source"), in_root);
    KinematicChain chain = parse_urdf(source_rig->arm.urdf_text);
    chain.ee_link = source_rig->arm.ee_link;
    source_model = RobotModel::build(chain, source_rig->arm.urdf_dir);
  }

  KinematicChain target_chain = parse_urdf(target_rig.arm.urdf_text);
  target_chain.ee_link = target_rig.arm.ee_link;
  RobotModel target_model =
      RobotModel::build(target_chain, target_rig.arm.urdf_dir);

  fs::create_directories(out_root);
  if (plate) {
    fs::create_directories(fs::path(out_root) / ("cam_" + cam_name));
    write_rgb_png((fs::path(out_root) / ("cam_" + cam_name) / "plate_rgb.png")
                      .string(),
                  plate->rgb);
    write_depth_png(
        (fs::path(out_root) / ("cam_" + cam_name) / "plate_depth.png").string(),
        plate->depth);
  }

  StageReport report;
  report.demos = static_cast<int>(ds.demos.size());
  std::vector<ExportDemo> exports(ds.demos.size());
  std::mutex report_mu;

  parallel_for(static_cast<int>(ds.demos.size()), jobs, [&](int di) {
    const Demonstration& demo = ds.demos[di];
    Crosspainter painter(target_rig, &target_model, cfg.crosspaint, cfg.ik);
    painter.begin_trajectory();
    Se3Pose source_base =
        source_rig ? source_rig->base(demo.robot_side) : Se3Pose::identity();

    auto [mixed, low_fid_drops] =
        mix_bimanual(demo, cfg.crosspaint.open_width,
                     cfg.crosspaint.closed_width, !cfg.crosspaint.drop_flagged);

    BimanualDemo out_demo;
    out_demo.id = demo.id;
    out_demo.task = demo.task;
    out_demo.source_demo = demo.id;
    out_demo.robot_side = demo.robot_side;
    out_demo.drop_count = low_fid_drops;

    fs::path in_demo = fs::path(in_root) / "demos" / demo.id;
    fs::path out_dir = fs::path(out_root) / "demos" / demo.id;
    fs::create_directories(out_dir / ("cam_" + cam_name));

    json fidelity = json::array();
    int flagged = 0;
    std::optional<JointConfig> prev_source_joints;

    for (auto& bf : mixed) {
      int i = bf.source_frame;
      const TrajectoryFrame& frame = demo.frames[i];
      const auto& ref = frame.observations.at(cam_name);
      RgbImage rgb = read_rgb_png((in_demo / ref.rgb).string());
      DepthImage depth = read_depth_png((in_demo / ref.depth).string());
      if (reproject) {
        auto re = reproject_depth_image(rgb, depth, source_cam, paint_cam);
        rgb = inpaint(re.rgb, re.holes, cfg.crosspaint.inpainter, plate);
        depth = std::move(re.depth);
        for (int y = 0; y < depth.height; ++y)
          for (int x = 0; x < depth.width; ++x)
            if (re.holes.at(x, y) && plate)
              depth.at(x, y) = plate->depth.at(x, y);
      }

      // robot -> robot pass
      bool frame_flagged = false;
      JointConfig source_joints;
      if (frame.robot_joints) {
        source_joints = *frame.robot_joints;
      } else if (source_model) {
        Se3Pose flange = compose(frame.robot_state.pose,
                                 invert(source_rig->arm.flange_to_grasp));
        IkResult ik = solve_ik(source_model->chain, flange,
                               prev_source_joints ? *prev_source_joints
                                                  : source_rig->arm.home,
                               cfg.ik, source_base);
        if (ik.converged) {
          source_joints = ik.joints;
          for (const auto& [n, v] :
               gripper_width_to_joints(source_model->chain,
                                       source_rig->arm.gripper,
                                       frame.robot_state.gripper_width)
                   .values)
            source_joints.set(n, v);
          prev_source_joints = source_joints;
        }
      }
      if (!source_joints.values.empty() && source_model) {
        SegmentationMask robot_mask = segment_embodiment_robot(
            *source_model, source_joints, source_base, paint_cam);
        FidelityRecord rec = painter.paint(
            rgb, depth, paint_cam, robot_mask, frame.robot_state.pose,
            frame.robot_state.gripper_width, demo.robot_side, plate,
            Rng::mix(cfg.seed, std::uint64_t(di) * 1000003 + i * 2), "robot");
        rec.frame = i;
        fidelity.push_back(fidelity_to_json(rec));
        frame_flagged |= rec.flagged;
      }

      // human -> robot pass
      {
        SegmentationMask hand_mask;
        if (auto gt =
                detail::load_gt_mask(in_root, demo.id, cam_name, "gt_hand_", i)) {
          hand_mask = external_mask(std::move(*gt));
          if (reproject) {
            // masks live in the source view; re-render is not available for
            // external masks, so reproject the mask geometry itself
            MaskImage moved(paint_cam.intrinsics.width,
                            paint_cam.intrinsics.height, 0);
            DepthImage dsrc = read_depth_png((in_demo / ref.depth).string());
            Se3Pose src_to_dst =
                compose(paint_cam.extrinsic, invert(source_cam.extrinsic));
            for (int y = 0; y < dsrc.height; ++y)
              for (int x = 0; x < dsrc.width; ++x) {
                if (!hand_mask.mask.at(x, y) || !(dsrc.at(x, y) > 0)) continue;
                Vec3 p = transform_point(
                    src_to_dst,
                    backproject(source_cam.intrinsics, Vec2(x, y), dsrc.at(x, y)));
                if (!(p.z() > 0)) continue;
                Vec2 uv = project(paint_cam.intrinsics, p);
                int u = int(std::lround(uv.x())), v = int(std::lround(uv.y()));
                if (moved.in_bounds(u, v)) moved.at(u, v) = 255;
              }
            hand_mask = external_mask(dilate(moved, 1));
          }
        } else {
          MaskImage subtract(depth.width, depth.height, 0);
          if (source_model && !source_joints.values.empty())
            subtract = dilate(segment_embodiment_robot(*source_model,
                                                       source_joints,
                                                       source_base, paint_cam)
                                  .mask,
                              2);
          DepthSegmentParams sp;
          sp.tau_bg = cfg.crosspaint.tau_bg;
          hand_mask =
              segment_embodiment_depth(depth, paint_cam, plate, sp, &subtract);
        }
        const EndEffectorAction& act = *frame.human_action;
        double width = act.gripper == GripperState::Open
                           ? cfg.crosspaint.open_width
                           : cfg.crosspaint.closed_width;
        FidelityRecord rec = painter.paint(
            rgb, depth, paint_cam, hand_mask, act.pose, width,
            other_side(demo.robot_side), plate,
            Rng::mix(cfg.seed, std::uint64_t(di) * 1000003 + i * 2 + 1),
            "human");
        rec.frame = i;
        fidelity.push_back(fidelity_to_json(rec));
        frame_flagged |= rec.flagged;
      }

      if (frame_flagged) ++flagged;
      if (frame_flagged && cfg.crosspaint.drop_flagged) {
        ++out_demo.drop_count;
        continue;
      }

      char fr[16];
      std::snprintf(fr, sizeof fr, "%06d", i);
      std::string rgb_rel = "cam_" + cam_name + "/rgb_" + fr + ".png";
      std::string depth_rel = "cam_" + cam_name + "/depth_" + fr + ".png";
      write_rgb_png((out_dir / rgb_rel).string(), rgb);
      write_depth_png((out_dir / depth_rel).string(), depth);
      bf.observations.clear();
      bf.observations[cam_name] = {rgb_rel, depth_rel};
      out_demo.frames.push_back(bf);
    }

    exports[di].demo = std::move(out_demo);
    exports[di].fidelity = {{"frames", fidelity}, {"flagged", flagged}};

    std::lock_guard lock(report_mu);
    report.frames += static_cast<int>(mixed.size());
    report.flagged += flagged;
    report.dropped += exports[di].demo.drop_count;
  });

  DatasetInfo out_info = ds.info;
  if (reproject) out_info.cameras[cam_name] = paint_cam;
  json robots = ds.info.robots;
  robots["target"] = rig_to_json(target_rig);
  json lineage = {{"stage", "crosspaint"},
                  {"config_hash", pipeline_config_hash(cfg)},
                  {"source_manifest",
                   file_hash((fs::path(in_root) / "manifest.json").string())}};
  export_augmented(out_root, out_info, robots, exports, lineage);
  return report;
}

}  // namespace duopaint
