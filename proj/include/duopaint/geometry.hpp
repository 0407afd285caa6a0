#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <tuple>

#include "duopaint/errors.hpp"
#include "duopaint/image.hpp"

namespace duopaint {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid transform: rotation stored as a unit quaternion (w,x,y,z on the
/// wire), translation in meters. Renormalized after every construction and
/// composition to bound drift.
struct Se3Pose {
  Vec3 t = Vec3::Zero();
  Quat q = Quat::Identity();

  Se3Pose() = default;
  Se3Pose(const Vec3& translation, const Quat& rotation)
      : t(translation), q(rotation.normalized()) {}

  static Se3Pose identity() { return {}; }

  Mat3 rotation_matrix() const { return q.toRotationMatrix(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation_matrix();
    m.block<3, 1>(0, 3) = t;
    return m;
  }
};

inline Se3Pose compose(const Se3Pose& a, const Se3Pose& b) {
  return Se3Pose(a.t + a.q * b.t, a.q * b.q);
}

inline Se3Pose invert(const Se3Pose& p) {
  Quat qc = p.q.conjugate();
  return Se3Pose(-(qc * p.t), qc);
}

inline Vec3 transform_point(const Se3Pose& pose, const Vec3& point) {
  return pose.q * point + pose.t;
}

/// Angle of the rotation, in [0, pi].
inline double rotation_angle(const Quat& q) {
  double v = q.vec().norm();
  return 2.0 * std::atan2(v, std::abs(q.w()));
}

/// Angle of the relative rotation between two poses.
inline double rotation_distance(const Se3Pose& a, const Se3Pose& b) {
  return rotation_angle(a.q.conjugate() * b.q);
}

inline double translation_distance(const Se3Pose& a, const Se3Pose& b) {
  return (a.t - b.t).norm();
}

struct CameraIntrinsics {
  double fx = 0, fy = 0;  // focal lengths, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      raise(ErrorCode::ConfigError, "focal lengths must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
      raise(ErrorCode::ConfigError, "principal point outside image");
  }
};

/// Calibrated camera: pinhole intrinsics + extrinsic mapping world -> camera.
/// Camera frame: +z forward along the optical axis, +x right, +y down.
struct Camera {
  CameraIntrinsics intrinsics;
  Se3Pose extrinsic;

  Vec3 world_to_camera(const Vec3& p_world) const {
    return transform_point(extrinsic, p_world);
  }
};

inline Vec2 project(const CameraIntrinsics& intr, const Vec3& point_cam) {
  if (!(point_cam.z() > 0))
    raise(ErrorCode::NonPositiveDepth, "projection requires z > 0");
  return {intr.fx * point_cam.x() / point_cam.z() + intr.cx,
          intr.fy * point_cam.y() / point_cam.z() + intr.cy};
}

inline Vec3 backproject(const CameraIntrinsics& intr, const Vec2& pixel,
                        double depth) {
  if (!(depth > 0) || !std::isfinite(depth))
    raise(ErrorCode::InvalidDepth, "backprojection requires finite depth > 0");
  return {(pixel.x() - intr.cx) * depth / intr.fx,
          (pixel.y() - intr.cy) * depth / intr.fy, depth};
}

/// Extrinsic for a camera at `eye` looking at `target` (+z forward,
/// +x right, +y down; `up` is the world up hint).
inline Se3Pose look_at_extrinsic(const Vec3& eye, const Vec3& target,
                                 const Vec3& up = Vec3::UnitZ()) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up);
  if (right.norm() < 1e-9) right = fwd.cross(Vec3::UnitY());
  right.normalize();
  Vec3 down = fwd.cross(right).normalized();
  Mat3 r;  // rows are the camera axes in world coordinates
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = fwd;
  return Se3Pose(-(r * eye), Quat(r));
}

struct ReprojectionResult {
  RgbImage rgb;
  DepthImage depth;
  MaskImage holes;  // nonzero where no source pixel splatted
};

/// Forward point splatting with z-buffering (nearest wins). Source depth is
/// what is available, so pixels are pushed from src into dst rather than
/// pulled; untouched dst pixels are reported in `holes` for the inpainter.
inline ReprojectionResult reproject_depth_image(const RgbImage& rgb,
                                                const DepthImage& depth,
                                                const Camera& src,
                                                const Camera& dst) {
  const int w = dst.intrinsics.width, h = dst.intrinsics.height;
  ReprojectionResult out;
  out.rgb = RgbImage(w, h, 0);
  out.depth = DepthImage(w, h, 0.f);
  out.holes = MaskImage(w, h, 255);

  const Se3Pose src_to_dst = compose(dst.extrinsic, invert(src.extrinsic));
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      float d = depth.at(x, y);
      if (!(d > 0.f)) continue;
      Vec3 p_src = backproject(src.intrinsics, Vec2(x, y), d);
      Vec3 p_dst = transform_point(src_to_dst, p_src);
      if (!(p_dst.z() > 0)) continue;
      Vec2 uv = project(dst.intrinsics, p_dst);
      int u = static_cast<int>(std::lround(uv.x()));
      int v = static_cast<int>(std::lround(uv.y()));
      if (u < 0 || u >= w || v < 0 || v >= h) continue;
      float zd = static_cast<float>(p_dst.z());
      bool occupied = out.holes.at(u, v) == 0;
      if (occupied && out.depth.at(u, v) <= zd) continue;
      out.depth.at(u, v) = zd;
      out.holes.at(u, v) = 0;
      for (int c = 0; c < 3; ++c) out.rgb.at(u, v, c) = rgb.at(x, y, c);
    }
  }
  return out;
}

}  // namespace duopaint
