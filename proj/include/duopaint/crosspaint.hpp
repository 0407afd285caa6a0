#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "duopaint/config.hpp"
#include "duopaint/dataset.hpp"
#include "duopaint/io_png.hpp"
#include "duopaint/render.hpp"

namespace duopaint {

struct BackgroundPlate {
  RgbImage rgb;
  DepthImage depth;
};

inline std::optional<BackgroundPlate> load_plate(const std::string& root,
                                                 const std::string& cam_name) {
  namespace fs = std::filesystem;
  auto dir = fs::path(root) / ("cam_" + cam_name);
  auto rgb = dir / "plate_rgb.png";
  auto depth = dir / "plate_depth.png";
  if (!fs::exists(rgb) || !fs::exists(depth)) return std::nullopt;
  BackgroundPlate plate;
  plate.rgb = read_rgb_png(rgb.string());
  plate.depth = read_depth_png(depth.string());
  return plate;
}

enum class MaskSource { RendererGt, DepthThreshold, External };

struct SegmentationMask {
  MaskImage mask;
  MaskSource source = MaskSource::RendererGt;

  long pixel_count() const {
    long n = 0;
    for (auto v : mask.data) n += v ? 1 : 0;
    return n;
  }
};

/// Robot-case segmentation: the renderer itself decides which pixels belong
/// to the source robot.
inline SegmentationMask segment_embodiment_robot(const RobotModel& source,
                                                 const JointConfig& q,
                                                 const Se3Pose& base,
                                                 const Camera& cam) {
  RenderOutput render = render_robot(source, q, base, cam, kDefaultLight);
  return {render.mask(), MaskSource::RendererGt};
}

struct DepthSegmentParams {
  double tau_bg = 0.01;  // meters of disagreement with the plate
  // world-frame workspace box; pixels outside are never foreground
  Vec3 box_lo = Vec3(-0.9, -0.3, 0.004);
  Vec3 box_hi = Vec3(0.9, 0.9, 0.8);
};

/// Human-case default segmentation: pixels whose depth departs from the
/// stored empty-scene plate inside the workspace box. `subtract` removes
/// pixels already explained by another embodiment (the rendered robot).
inline SegmentationMask segment_embodiment_depth(
    const DepthImage& depth, const Camera& cam, const BackgroundPlate* plate,
    const DepthSegmentParams& params = {}, const MaskImage* subtract = nullptr) {
  if (!plate)
    raise(ErrorCode::BackgroundMissing,
          "depth-threshold segmentation needs a background plate");
  SegmentationMask out;
  out.source = MaskSource::DepthThreshold;
  out.mask = MaskImage(depth.width, depth.height, 0);
  Se3Pose cam_to_world = invert(cam.extrinsic);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      float d = depth.at(x, y);
      if (!(d > 0)) continue;
      float pd = plate->depth.at(x, y);
      bool fg = pd > 0 ? std::abs(d - pd) > params.tau_bg : true;
      if (!fg) continue;
      if (subtract && subtract->at(x, y)) continue;
      Vec3 world = transform_point(
          cam_to_world, backproject(cam.intrinsics, Vec2(x, y), d));
      if ((world.array() < params.box_lo.array()).any() ||
          (world.array() > params.box_hi.array()).any())
        continue;
      out.mask.at(x, y) = 255;
    }
  }
  return out;
}

inline SegmentationMask external_mask(MaskImage mask) {
  return {std::move(mask), MaskSource::External};
}

// --- inpainting ----------------------------------------------------------------

/// Replaces hole pixels with the stored empty-scene plate.
inline RgbImage inpaint_background_plate(const RgbImage& rgb,
                                         const MaskImage& holes,
                                         const BackgroundPlate& plate) {
  RgbImage out = rgb;
  for (std::size_t i = 0; i < holes.data.size(); ++i)
    if (holes.data[i])
      for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = plate.rgb.data[i * 3 + c];
  return out;
}

/// Fallback filler: iterative neighborhood averaging from the hole boundary
/// inward. Deterministic Jacobi sweeps.
inline RgbImage inpaint_diffuse(const RgbImage& rgb, const MaskImage& holes) {
  RgbImage out = rgb;
  MaskImage hole = holes;
  const int w = rgb.width, h = rgb.height;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int pass = 0; pass < w + h; ++pass) {
    std::vector<std::pair<int, int>> fill;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!hole.at(x, y)) continue;
        int sum[3] = {0, 0, 0}, n = 0;
        for (int k = 0; k < 4; ++k) {
          int nx = x + dx[k], ny = y + dy[k];
          if (nx < 0 || nx >= w || ny < 0 || ny >= h || hole.at(nx, ny)) continue;
          for (int c = 0; c < 3; ++c) sum[c] += out.at(nx, ny, c);
          ++n;
        }
        if (n == 0) continue;
        for (int c = 0; c < 3; ++c)
          out.at(x, y, c) = static_cast<std::uint8_t>(sum[c] / n);
        fill.emplace_back(x, y);
      }
    if (fill.empty()) break;
    for (auto [x, y] : fill) hole.at(x, y) = 0;
  }
  return out;
}

/// Inpaint dispatch: background_plate (with diffuse fallback when no plate
/// exists), diffuse_fill, or an externally supplied per-frame fill image.
inline RgbImage inpaint(const RgbImage& rgb, const MaskImage& holes,
                        const std::string& method,
                        const BackgroundPlate* plate,
                        const RgbImage* external_fill = nullptr) {
  if (!holes.same_size(rgb.width, rgb.height))
    raise(ErrorCode::SchemaError, "hole mask size mismatch");
  if (external_fill) {
    RgbImage out = rgb;
    for (std::size_t i = 0; i < holes.data.size(); ++i)
      if (holes.data[i])
        for (int c = 0; c < 3; ++c)
          out.data[i * 3 + c] = external_fill->data[i * 3 + c];
    return out;
  }
  if (method == "background_plate") {
    if (plate) return inpaint_background_plate(rgb, holes, *plate);
    return inpaint_diffuse(rgb, holes);
  }
  if (method == "diffuse_fill") return inpaint_diffuse(rgb, holes);
  raise(ErrorCode::NoFillAvailable, "no inpainter for method '" + method + "'");
}

// --- the per-frame cross-painting pass ------------------------------------------

struct FidelityRecord {
  int frame = -1;
  std::string pass;  // "robot" or "human"
  bool flagged = false;
  std::string reason;
  bool ik_converged = true;
  double ik_pos_err = 0.0;
  double ik_rot_err = 0.0;
  double seg_coverage = 0.0;  // source mask density
  double icp_rmse = -1.0;     // filled by the retarget stage
};

inline json fidelity_to_json(const FidelityRecord& r) {
  return {{"frame", r.frame},        {"pass", r.pass},
          {"flagged", r.flagged},    {"reason", r.reason},
          {"ik_converged", r.ik_converged},
          {"ik_pos_err", r.ik_pos_err},
          {"ik_rot_err", r.ik_rot_err},
          {"seg_coverage", r.seg_coverage},
          {"icp_rmse", r.icp_rmse}};
}

/// Replaces one embodiment in a frame with the target robot arm. Holds the
/// per-trajectory IK seeds (one per arm side); instantiate one per worker.
class Crosspainter {
 public:
  Crosspainter(const RobotRig& target_rig, const RobotModel* target_model,
               CrosspaintParams params, IkParams ik)
      : rig_(target_rig), model_(target_model), params_(std::move(params)),
        ik_(ik) {
    params_.validate();
  }

  void begin_trajectory() {
    prev_left_.reset();
    prev_right_.reset();
  }

  /// segment (given) -> inpaint -> IK -> gripper map -> render -> brightness
  /// -> overlay. rgb/depth are edited in place. On IK failure the embodiment
  /// is still removed but no overlay happens and the record is flagged.
  FidelityRecord paint(RgbImage& rgb, DepthImage& depth, const Camera& cam,
                       const SegmentationMask& source_mask,
                       const Se3Pose& target_ee, double width, Side arm_side,
                       const BackgroundPlate* plate, std::uint64_t frame_seed,
                       const char* pass_name) {
    FidelityRecord record;
    record.pass = pass_name;
    record.seg_coverage =
        double(source_mask.pixel_count()) / double(source_mask.mask.pixel_count());

    // mask out the source embodiment, swallow its fringe, fill the holes
    MaskImage holes = dilate(source_mask.mask, params_.dilation_px);
    rgb = inpaint(rgb, holes, params_.inpainter, plate);
    for (int y = 0; y < depth.height; ++y)
      for (int x = 0; x < depth.width; ++x)
        if (holes.at(x, y))
          depth.at(x, y) = plate ? plate->depth.at(x, y) : 0.f;

    // target joints that put the grasp frame at the source pose
    Se3Pose flange_target = compose(target_ee, invert(rig_.arm.flange_to_grasp));
    std::optional<JointConfig>& prev =
        arm_side == Side::Left ? prev_left_ : prev_right_;
    JointConfig seed = prev ? *prev : rig_.arm.home;
    IkResult ik = solve_ik(model_->chain, flange_target, seed, ik_,
                           rig_.base(arm_side));
    record.ik_converged = ik.converged;
    record.ik_pos_err = ik.pos_error;
    record.ik_rot_err = ik.rot_error;
    if (!ik.converged) {
      record.flagged = true;
      record.reason = "IkFailed";
      return record;
    }
    prev = ik.joints;

    JointConfig q = ik.joints;
    for (const auto& [name, v] :
         gripper_width_to_joints(model_->chain, rig_.arm.gripper, width).values)
      q.set(name, v);

    RenderOutput target = render_robot(*model_, q, rig_.base(arm_side), cam,
                                       kDefaultLight);
    target = brightness_augment(target, params_.brightness_lo,
                                params_.brightness_hi, frame_seed);

    // overlay: rendered pixels replace frame pixels inside the target mask
    for (int y = 0; y < depth.height; ++y)
      for (int x = 0; x < depth.width; ++x) {
        if (target.instance_mask.at(x, y) == 0) continue;
        float tz = target.depth.at(x, y);
        if (params_.z_test && depth.at(x, y) > 0 && depth.at(x, y) < tz)
          continue;  // scene geometry in front of the arm
        for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = target.rgb.at(x, y, c);
        depth.at(x, y) = tz;
      }
    return record;
  }

  const RobotModel& model() const { return *model_; }
  const RobotRig& rig() const { return rig_; }

 private:
  RobotRig rig_;
  const RobotModel* model_;
  CrosspaintParams params_;
  IkParams ik_;
  std::optional<JointConfig> prev_left_;
  std::optional<JointConfig> prev_right_;
};

}  // namespace duopaint
