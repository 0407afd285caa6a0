#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"
#include "duopaint/json_util.hpp"
#include "duopaint/mesh.hpp"
#include "duopaint/pointcloud.hpp"
#include "duopaint/registration.hpp"

namespace duopaint {

enum class Side { Left, Right };

inline const char* side_name(Side s) { return s == Side::Left ? "left" : "right"; }
inline Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  raise(ErrorCode::SchemaError, "side must be 'left' or 'right', got '" + s + "'");
}
inline Side other_side(Side s) { return s == Side::Left ? Side::Right : Side::Left; }

/// 21 3D landmarks in MANO ordering: 0 wrist, 1-4 thumb (4 = tip),
/// 5-8 index (5 = MCP, 8 = tip), 9-12 middle (9 = MCP), 13-16 ring,
/// 17-20 pinky. Meters.
struct HandKeypoints {
  std::array<Vec3, 21> landmarks{};
  Side side = Side::Right;

  static constexpr int kWrist = 0;
  static constexpr int kThumbTip = 4;
  static constexpr int kIndexMcp = 5;
  static constexpr int kIndexTip = 8;
  static constexpr int kMiddleMcp = 9;

  void validate() const {
    for (const auto& p : landmarks)
      if (!p.allFinite())
        raise(ErrorCode::SchemaError, "hand keypoints hold non-finite value");
    double span = (landmarks[kMiddleMcp] - landmarks[kWrist]).norm();
    if (span <= 0.02 || span >= 0.20)
      raise(ErrorCode::SchemaError,
            "implausible hand: wrist to middle-MCP distance " +
                std::to_string(span) + " m");
  }
};

inline HandKeypoints transform_keypoints(const Se3Pose& pose,
                                         HandKeypoints kp) {
  for (auto& p : kp.landmarks) p = transform_point(pose, p);
  return kp;
}

enum class GripperState { Open, Closed };
enum class Provenance { Robot, HumanRetargeted };

inline const char* gripper_state_name(GripperState g) {
  return g == GripperState::Open ? "open" : "closed";
}
inline const char* provenance_name(Provenance p) {
  return p == Provenance::Robot ? "robot" : "human_retargeted";
}

struct EndEffectorAction {
  Se3Pose pose;  // grasp frame, world
  GripperState gripper = GripperState::Open;
  Provenance provenance = Provenance::HumanRetargeted;
  double width = -1.0;  // commanded width, meters; < 0 when unavailable
};

/// Wrist frame from keypoints: origin at the wrist, x toward the fingers
/// (middle MCP), z out of the palm back, mirrored per hand side; y = z x x.
inline Se3Pose wrist_frame(const HandKeypoints& kp) {
  kp.validate();
  Vec3 origin = kp.landmarks[HandKeypoints::kWrist];
  Vec3 toward_fingers = kp.landmarks[HandKeypoints::kMiddleMcp] - origin;
  Vec3 toward_index = kp.landmarks[HandKeypoints::kIndexMcp] - origin;
  double angle = std::atan2(toward_fingers.cross(toward_index).norm(),
                            toward_fingers.dot(toward_index));
  constexpr double kOneDegree = M_PI / 180.0;
  if (angle < kOneDegree || angle > M_PI - kOneDegree)
    raise(ErrorCode::DegenerateHand,
          "wrist/index-MCP/middle-MCP nearly collinear");

  Vec3 x = toward_fingers.normalized();
  Vec3 z = x.cross(toward_index).normalized();
  if (kp.side == Side::Left) z = -z;
  Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Se3Pose(origin, Quat(r));
}

/// Angle at the index-proximal landmark between the directions to the thumb
/// tip and to the index tip, in [0, pi].
inline double gripper_angle(const HandKeypoints& kp) {
  kp.validate();
  Vec3 pivot = kp.landmarks[HandKeypoints::kIndexMcp];
  Vec3 to_thumb = kp.landmarks[HandKeypoints::kThumbTip] - pivot;
  Vec3 to_index = kp.landmarks[HandKeypoints::kIndexTip] - pivot;
  if (to_thumb.norm() < 1e-3 || to_index.norm() < 1e-3)
    raise(ErrorCode::DegenerateHand,
          "thumb or index tip coincides with the index-proximal landmark");
  return std::atan2(to_thumb.cross(to_index).norm(), to_thumb.dot(to_index));
}

/// Wrist pose + binary open/close from the pincer angle. Closed strictly
/// below the threshold; at the threshold the gripper reads open.
inline EndEffectorAction retarget(const HandKeypoints& kp, double threshold,
                                  const Se3Pose& grasp_offset) {
  EndEffectorAction action;
  action.pose = compose(wrist_frame(kp), grasp_offset);
  action.gripper = gripper_angle(kp) < threshold ? GripperState::Closed
                                                 : GripperState::Open;
  action.provenance = Provenance::HumanRetargeted;
  return action;
}

/// Trajectory-level open/close decision with a hysteresis band and a
/// minimum hold between state changes, suppressing estimator chatter.
/// band = 0 and min_hold = 1 degenerate to the plain per-frame threshold.
inline std::vector<GripperState> apply_gripper_hysteresis(
    const std::vector<double>& angles, double threshold, double band,
    int min_hold) {
  std::vector<GripperState> states;
  states.reserve(angles.size());
  if (angles.empty()) return states;
  GripperState state =
      angles[0] < threshold ? GripperState::Closed : GripperState::Open;
  states.push_back(state);
  long last_change = -(min_hold > 0 ? min_hold : 1);
  for (std::size_t t = 1; t < angles.size(); ++t) {
    GripperState desired = state;
    if (state == GripperState::Open && angles[t] < threshold - band)
      desired = GripperState::Closed;
    else if (state == GripperState::Closed && angles[t] >= threshold + band)
      desired = GripperState::Open;
    if (desired != state &&
        static_cast<long>(t) - last_change >= (min_hold > 0 ? min_hold : 1)) {
      state = desired;
      last_change = static_cast<long>(t);
    }
    states.push_back(state);
  }
  return states;
}

// --- canonical hand template -----------------------------------------------
//
// A low-poly hand used two ways: as the deterministic stand-in for a neural
// hand-mesh estimate (keypoints and mesh are rigidly consistent by
// construction) and as the proxy geometry the synthetic scenes render. The
// mesh is a single-sided sheet: rendered depth samples the same surface the
// vertices lie on, so registration sees no thickness offset. The thumb and
// index chains pivot at the index MCP by half the pincer angle each, which
// makes gripper_angle() of the template exactly the commanded angle.

namespace hand_detail {

inline std::array<Vec3, 21> template_landmarks(double pincer_angle) {
  std::array<Vec3, 21> kp{};
  kp[0] = {0, 0, 0};
  // pincer: thumb and index chains pivot at the index MCP around a common
  // offset direction, half the angle each, so the landmark angle is exact.
  // the fingers fan out at distinct directions and lengths; near-parallel
  // fingers would hand registration a comb-like rotational symmetry.
  const double fan = 0.30;  // common pincer offset from +x, radians
  double h = pincer_angle / 2.0;
  Vec3 d_index(std::cos(fan - h), std::sin(fan - h), 0);
  Vec3 d_thumb(std::cos(fan + h), std::sin(fan + h), 0);
  Vec3 index_mcp(0.088, 0.025, 0);
  Vec3 thumb_root(0.022, 0.030, -0.002);
  Vec3 thumb_tip = index_mcp + 0.070 * d_thumb;
  kp[1] = thumb_root;
  kp[2] = thumb_root + 0.38 * (thumb_tip - thumb_root);
  kp[3] = thumb_root + 0.70 * (thumb_tip - thumb_root);
  kp[4] = thumb_tip;
  kp[5] = index_mcp;
  kp[6] = index_mcp + 0.022 * d_index;
  kp[7] = index_mcp + 0.044 * d_index;
  kp[8] = index_mcp + 0.062 * d_index;
  auto finger = [&](int mcp, const Vec3& base, double dir, double len) {
    Vec3 d(std::cos(dir), std::sin(dir), 0);
    kp[mcp] = base;
    kp[mcp + 1] = base + 0.40 * len * d + Vec3(0, 0, 0.003);
    kp[mcp + 2] = base + 0.72 * len * d + Vec3(0, 0, 0.003);
    kp[mcp + 3] = base + len * d;
  };
  finger(9, Vec3(0.090, 0.000, 0), 0.00, 0.075);    // middle
  finger(13, Vec3(0.086, -0.022, 0), -0.17, 0.058); // ring
  finger(17, Vec3(0.080, -0.042, 0), -0.38, 0.040); // pinky
  return kp;
}

/// Deterministic per-vertex jitter in [-1,1]; regular vertex lattices give
/// nearest-neighbor registration spurious shift-by-one equilibria, so the
/// sheet sampling is intentionally irregular.
inline double lattice_jitter(int i, int j, int k) {
  std::uint32_t h =
      0x9e3779b9u * static_cast<std::uint32_t>(i + 37 * j + 101 * k + 7);
  h ^= h >> 16;
  h *= 0x85ebca6bu;
  h ^= h >> 13;
  return double(h & 0xffff) / 32767.5 - 1.0;
}

/// Sheet strip along a polyline: `across` vertices per sample, lateral in
/// the palm plane.
inline void append_strip(TriangleMesh& m, const std::vector<Vec3>& spine,
                         double half_width, int across = 3) {
  int base = static_cast<int>(m.vertices.size());
  int rows = static_cast<int>(spine.size());
  for (int r = 0; r < rows; ++r) {
    Vec3 dir = (r + 1 < rows ? spine[r + 1] - spine[r] : spine[r] - spine[r - 1]);
    Vec3 lat = dir.cross(Vec3::UnitZ());
    if (lat.norm() < 1e-9) lat = Vec3::UnitY();
    lat.normalize();
    Vec3 along = dir.normalized();
    double seg = (spine.back() - spine.front()).norm() / std::max(1, rows - 1);
    double w = half_width * (1.0 - 0.35 * double(r) / std::max(1, rows - 1));
    for (int a = 0; a < across; ++a) {
      double s = across == 1 ? 0.0 : (2.0 * a / (across - 1) - 1.0);
      // slight crown so the sheet is not exactly planar
      double crown = 0.0015 * (1.0 - s * s);
      Vec3 p = spine[r] + s * w * lat + Vec3(0, 0, crown);
      if (r > 0 && r + 1 < rows)
        p += 0.30 * seg * lattice_jitter(r, a, base) * along;
      if (a > 0 && a + 1 < across)
        p += 0.30 * w * lattice_jitter(r, a, base + 1) * lat;
      m.vertices.push_back(p);
    }
  }
  for (int r = 0; r + 1 < rows; ++r)
    for (int a = 0; a + 1 < across; ++a) {
      int v0 = base + r * across + a;
      m.triangles.emplace_back(v0, v0 + 1, v0 + across + 1);
      m.triangles.emplace_back(v0, v0 + across + 1, v0 + across);
    }
}

inline std::vector<Vec3> resample_polyline(const std::vector<Vec3>& pts,
                                           int samples) {
  std::vector<Vec3> out;
  out.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    double s = double(i) / (samples - 1) * (double(pts.size()) - 1.0);
    int k = std::min(static_cast<int>(s), static_cast<int>(pts.size()) - 2);
    double f = s - k;
    out.push_back((1 - f) * pts[k] + f * pts[k + 1]);
  }
  return out;
}

inline TriangleMesh template_mesh(double pincer_angle) {
  auto kp = template_landmarks(pincer_angle);
  TriangleMesh m;
  m.color = Vec3(0.85, 0.66, 0.55);  // skin-ish

  // palm sheet: rows from the wrist through the MCP line into the proximal
  // finger region (webbing), widths interpolated
  const int palm_rows = 12, palm_cols = 9;
  for (int r = 0; r < palm_rows; ++r) {
    double fx = double(r) / (palm_rows - 1);
    double x = fx * 0.112;
    double y_hi = 0.030 + fx * 0.008;   // thumb side
    double y_lo = -0.030 - fx * 0.028;  // pinky side
    for (int c = 0; c < palm_cols; ++c) {
      double fy = double(c) / (palm_cols - 1);
      double y = y_lo + fy * (y_hi - y_lo);
      double dome = 0.005 * std::sin(M_PI * fx) * std::sin(M_PI * fy);
      bool interior_r = r > 0 && r + 1 < palm_rows;
      bool interior_c = c > 0 && c + 1 < palm_cols;
      double jx = interior_r ? 0.0045 * lattice_jitter(r, c, 3) : 0.0;
      double jy = interior_c ? 0.0040 * lattice_jitter(r, c, 5) : 0.0;
      m.vertices.emplace_back(x + jx, y + jy, dome);
    }
  }
  for (int r = 0; r + 1 < palm_rows; ++r)
    for (int c = 0; c + 1 < palm_cols; ++c) {
      int v0 = r * palm_cols + c;
      m.triangles.emplace_back(v0, v0 + 1, v0 + palm_cols + 1);
      m.triangles.emplace_back(v0, v0 + palm_cols + 1, v0 + palm_cols);
    }

  auto chain = [&](int a, int b, int c, int d) {
    return resample_polyline({kp[a], kp[b], kp[c], kp[d]}, 10);
  };
  append_strip(m, chain(1, 2, 3, 4), 0.009, 4);          // thumb
  append_strip(m, chain(5, 6, 7, 8), 0.008, 4);          // index
  append_strip(m, chain(9, 10, 11, 12), 0.008, 4);       // middle
  append_strip(m, chain(13, 14, 15, 16), 0.0075, 4);     // ring
  append_strip(m, chain(17, 18, 19, 20), 0.006, 4);      // pinky
  m.cleanup();
  return m;
}

}  // namespace hand_detail

/// Template keypoints in the wrist frame (wrist_frame() of the result is the
/// identity for the right side and for the mirrored left side).
inline HandKeypoints hand_template_keypoints(double pincer_angle, Side side) {
  HandKeypoints kp;
  kp.side = side;
  kp.landmarks = hand_detail::template_landmarks(pincer_angle);
  if (side == Side::Left)
    for (auto& p : kp.landmarks) p.y() = -p.y();
  return kp;
}

inline TriangleMesh hand_template_mesh(double pincer_angle, Side side) {
  TriangleMesh m = hand_detail::template_mesh(pincer_angle);
  if (side == Side::Left) {
    for (auto& v : m.vertices) v.y() = -v.y();
    for (auto& t : m.triangles) std::swap(t.y(), t.z());  // keep face areas sane
  }
  return m;
}

/// Keypoints posed in the world: wrist_frame(result) == wrist_pose.
inline HandKeypoints pose_hand(const Se3Pose& wrist_pose, double pincer_angle,
                               Side side) {
  return transform_keypoints(wrist_pose, hand_template_keypoints(pincer_angle, side));
}

/// Mesh rigidly consistent with the given keypoints: the template posed at
/// wrist_frame(kp) with the keypoints' own pincer angle.
inline TriangleMesh build_hand_proxy(const HandKeypoints& kp) {
  double angle = gripper_angle(kp);
  return transform_mesh(wrist_frame(kp), hand_template_mesh(angle, kp.side));
}

// --- depth refinement -------------------------------------------------------

struct RefineResult {
  HandKeypoints keypoints;
  IcpResult icp;
};

/// Registers the hand mesh vertices onto the segmented depth cloud and
/// applies the recovered rigid transform to all 21 landmarks. Raises
/// RegistrationFailed when no correspondences exist; callers flag the frame
/// low-fidelity rather than dropping it.
inline RefineResult refine_keypoints(const HandKeypoints& raw,
                                     const PointCloud& mesh_vertices,
                                     const PointCloud& depth_cloud,
                                     const IcpParams& params = {}) {
  RefineResult out;
  try {
    out.icp = icp_register(mesh_vertices, depth_cloud, Se3Pose::identity(),
                           params);
  } catch (const Error& e) {
    raise(ErrorCode::RegistrationFailed,
          std::string("hand registration failed: ") + e.what());
  }
  out.keypoints = transform_keypoints(out.icp.transform, raw);
  return out;
}

// --- pluggable per-frame hand pose providers --------------------------------

struct HandObservation {
  HandKeypoints keypoints;
  PointCloud mesh_vertices;  // internally consistent with the keypoints
};

/// Per-frame (keypoints, mesh vertices) provider. Implementations must be
/// deterministic given frame index and seed.
class HandPoseSource {
 public:
  virtual ~HandPoseSource() = default;
  virtual int frame_count() const = 0;
  virtual HandObservation frame(int frame_index) = 0;
};

inline HandObservation observation_from_keypoints(const HandKeypoints& kp) {
  HandObservation obs;
  obs.keypoints = kp;
  TriangleMesh mesh = build_hand_proxy(kp);
  obs.mesh_vertices.points = std::move(mesh.vertices);
  return obs;
}

/// Keypoint files: JSON array of frames, each {landmarks: [[x,y,z] x 21],
/// side}, meters, camera frame.
inline std::vector<HandKeypoints> load_keypoints_json(const std::string& path) {
  json doc = load_json_file(path);
  if (!doc.is_array()) raise(ErrorCode::SchemaError, path + ": expected array");
  std::vector<HandKeypoints> frames;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& f = doc[i];
    const json& lm = f.at("landmarks");
    if (!lm.is_array() || lm.size() != 21)
      raise(ErrorCode::SchemaError,
            path + " frame " + std::to_string(i) + ": need 21 landmarks");
    HandKeypoints kp;
    kp.side = side_from_string(f.at("side").get<std::string>());
    for (int k = 0; k < 21; ++k)
      kp.landmarks[k] = Vec3(lm[k].at(0), lm[k].at(1), lm[k].at(2));
    frames.push_back(kp);
  }
  return frames;
}

inline json keypoints_to_json(const HandKeypoints& kp) {
  json lm = json::array();
  for (const auto& p : kp.landmarks) lm.push_back({p.x(), p.y(), p.z()});
  return {{"landmarks", lm}, {"side", side_name(kp.side)}};
}

inline void save_keypoints_json(const std::string& path,
                                const std::vector<HandKeypoints>& frames) {
  json doc = json::array();
  for (const auto& kp : frames) doc.push_back(keypoints_to_json(kp));
  write_text_file(path, doc.dump(2) + "\n");
}

class FileHandPoseSource : public HandPoseSource {
 public:
  explicit FileHandPoseSource(const std::string& path)
      : frames_(load_keypoints_json(path)) {}

  int frame_count() const override { return static_cast<int>(frames_.size()); }

  HandObservation frame(int frame_index) override {
    if (frame_index < 0 || frame_index >= frame_count())
      raise(ErrorCode::SourceUnavailable,
            "no keypoints for frame " + std::to_string(frame_index));
    return observation_from_keypoints(frames_[frame_index]);
  }

 private:
  std::vector<HandKeypoints> frames_;
};

}  // namespace duopaint
