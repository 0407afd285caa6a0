#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"
#include "duopaint/image.hpp"
#include "duopaint/kinematics.hpp"
#include "duopaint/mesh.hpp"
#include "duopaint/rng.hpp"

namespace duopaint {

struct RenderOutput {
  RgbImage rgb;
  DepthImage depth;     // camera-space z, meters; 0 where nothing rendered
  IdImage instance_mask;  // 0 = background

  MaskImage mask() const { return mask_from_ids(instance_mask); }
};

struct MeshInstance {
  TriangleMesh mesh;
  Se3Pose pose;  // mesh -> world
  std::uint16_t id = 1;
};

namespace detail {

constexpr double kNearPlane = 1e-3;
constexpr double kAmbient = 0.3;

struct CamVertex {
  Vec3 p;  // camera frame
};

/// Clips a camera-space triangle against z = near; emits 0..2 triangles.
inline int clip_near(const Vec3 in[3], Vec3 out[2][3]) {
  Vec3 keep[4];
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = in[i];
    const Vec3& b = in[(i + 1) % 3];
    bool a_in = a.z() > kNearPlane, b_in = b.z() > kNearPlane;
    if (a_in) keep[n++] = a;
    if (a_in != b_in) {
      double t = (kNearPlane - a.z()) / (b.z() - a.z());
      keep[n++] = a + t * (b - a);
    }
  }
  if (n < 3) return 0;
  out[0][0] = keep[0];
  out[0][1] = keep[1];
  out[0][2] = keep[2];
  if (n == 3) return 1;
  out[1][0] = keep[0];
  out[1][1] = keep[2];
  out[1][2] = keep[3];
  return 2;
}

inline void rasterize_triangle(RenderOutput& out, const CameraIntrinsics& intr,
                               const Vec3 cam[3], const Vec3& shaded_rgb,
                               std::uint16_t id) {
  // screen-space positions with camera-space depth
  double sx[3], sy[3], inv_z[3];
  for (int i = 0; i < 3; ++i) {
    sx[i] = intr.fx * cam[i].x() / cam[i].z() + intr.cx;
    sy[i] = intr.fy * cam[i].y() / cam[i].z() + intr.cy;
    inv_z[i] = 1.0 / cam[i].z();
  }
  double area = (sx[1] - sx[0]) * (sy[2] - sy[0]) -
                (sx[2] - sx[0]) * (sy[1] - sy[0]);
  if (area == 0.0) return;

  int x0 = std::max(0, static_cast<int>(std::ceil(std::min({sx[0], sx[1], sx[2]}))));
  int x1 = std::min(intr.width - 1,
                    static_cast<int>(std::floor(std::max({sx[0], sx[1], sx[2]}))));
  int y0 = std::max(0, static_cast<int>(std::ceil(std::min({sy[0], sy[1], sy[2]}))));
  int y1 = std::min(intr.height - 1,
                    static_cast<int>(std::floor(std::max({sy[0], sy[1], sy[2]}))));

  std::uint8_t rgb8[3];
  for (int c = 0; c < 3; ++c)
    rgb8[c] = static_cast<std::uint8_t>(
        std::clamp(std::lround(255.0 * shaded_rgb[c]), 0l, 255l));

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double w0 = (sx[1] - x) * (sy[2] - y) - (sx[2] - x) * (sy[1] - y);
      double w1 = (sx[2] - x) * (sy[0] - y) - (sx[0] - x) * (sy[2] - y);
      double w2 = (sx[0] - x) * (sy[1] - y) - (sx[1] - x) * (sy[0] - y);
      // inclusive on edges, accepting either winding
      bool inside = (w0 >= 0 && w1 >= 0 && w2 >= 0) ||
                    (w0 <= 0 && w1 <= 0 && w2 <= 0);
      if (!inside) continue;
      double l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
      double z = 1.0 / (l0 * inv_z[0] + l1 * inv_z[1] + l2 * inv_z[2]);
      if (!(z > 0)) continue;
      float zf = static_cast<float>(z);
      float cur = out.depth.at(x, y);
      if (cur != 0.f && cur <= zf) continue;
      out.depth.at(x, y) = zf;
      out.instance_mask.at(x, y) = id;
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = rgb8[c];
    }
  }
}

}  // namespace detail

/// Z-buffered perspective rasterization with flat two-sided Lambertian
/// shading (fixed ambient 0.3). No culling: robot meshes are not guaranteed
/// consistently wound. Deterministic: identical inputs give bit-identical
/// output.
inline RenderOutput render_scene(const std::vector<MeshInstance>& meshes,
                                 const Camera& cam, const Vec3& light) {
  RenderOutput out;
  out.rgb = RgbImage(cam.intrinsics.width, cam.intrinsics.height, 0);
  out.depth = DepthImage(cam.intrinsics.width, cam.intrinsics.height, 0.f);
  out.instance_mask = IdImage(cam.intrinsics.width, cam.intrinsics.height, 0);
  Vec3 light_dir = light.normalized();

  for (const auto& inst : meshes) {
    Se3Pose mesh_to_cam = compose(cam.extrinsic, inst.pose);
    std::vector<Vec3> cam_verts(inst.mesh.vertices.size());
    for (std::size_t i = 0; i < cam_verts.size(); ++i)
      cam_verts[i] = transform_point(mesh_to_cam, inst.mesh.vertices[i]);

    for (std::size_t f = 0; f < inst.mesh.triangles.size(); ++f) {
      const auto& tri = inst.mesh.triangles[f];
      // world-frame face normal for shading
      Vec3 a = transform_point(inst.pose, inst.mesh.vertices[tri.x()]);
      Vec3 b = transform_point(inst.pose, inst.mesh.vertices[tri.y()]);
      Vec3 c = transform_point(inst.pose, inst.mesh.vertices[tri.z()]);
      Vec3 n = (b - a).cross(c - a);
      double nn = n.norm();
      if (nn < 1e-14) continue;
      double lambert = std::abs(n.dot(light_dir)) / nn;
      double intensity =
          detail::kAmbient + (1.0 - detail::kAmbient) * lambert;
      Vec3 shaded = intensity * inst.mesh.face_color(static_cast<int>(f));

      Vec3 in[3] = {cam_verts[tri.x()], cam_verts[tri.y()], cam_verts[tri.z()]};
      Vec3 clipped[2][3];
      int n_tris = detail::clip_near(in, clipped);
      for (int k = 0; k < n_tris; ++k)
        detail::rasterize_triangle(out, cam.intrinsics, clipped[k], shaded,
                                   inst.id);
    }
  }
  return out;
}

/// A kinematic chain plus tessellated visual geometry per link, ready to
/// pose and render. Mesh references resolve relative to `mesh_dir`.
struct RobotModel {
  KinematicChain chain;
  std::vector<TriangleMesh> link_meshes;  // parallel to chain.links

  static RobotModel build(KinematicChain parsed,
                          const std::string& mesh_dir = "") {
    RobotModel model;
    model.chain = std::move(parsed);
    model.link_meshes.reserve(model.chain.links.size());
    for (const auto& link : model.chain.links) {
      TriangleMesh m;
      switch (link.visual.kind) {
        case GeometryKind::None:
          break;
        case GeometryKind::Box:
          m = make_box(link.visual.box_size);
          break;
        case GeometryKind::Cylinder:
          m = make_cylinder(link.visual.radius, link.visual.length);
          break;
        case GeometryKind::Sphere:
          m = make_sphere(link.visual.radius);
          break;
        case GeometryKind::Mesh: {
          std::filesystem::path p(link.visual.mesh_path);
          if (p.is_relative() && !mesh_dir.empty())
            p = std::filesystem::path(mesh_dir) / p;
          if (!std::filesystem::exists(p))
            raise(ErrorCode::MissingMesh,
                  "link " + link.name + ": mesh not found: " + p.string());
          std::string ext = p.extension().string();
          if (ext == ".obj")
            m = load_obj(p.string());
          else if (ext == ".ply")
            m = load_ply_mesh(p.string());
          else
            raise(ErrorCode::MissingMesh,
                  "link " + link.name + ": unsupported mesh format " + ext);
          for (auto& v : m.vertices)
            v = v.cwiseProduct(link.visual.mesh_scale);
          break;
        }
      }
      m.color = link.visual.color;
      // bake the visual origin so render-time posing is just the link pose
      m = transform_mesh(link.visual_origin, std::move(m));
      model.link_meshes.push_back(std::move(m));
    }
    return model;
  }
};

/// FK-poses the robot's link visuals and renders them. Instance ids are
/// id_base + link index, one namespace per robot.
inline RenderOutput render_robot(const RobotModel& model, const JointConfig& q,
                                 const Se3Pose& base, const Camera& cam,
                                 const Vec3& light,
                                 std::uint16_t id_base = 1) {
  auto poses = forward_kinematics(model.chain, q, base);
  std::vector<MeshInstance> instances;
  for (std::size_t i = 0; i < model.chain.links.size(); ++i) {
    if (model.link_meshes[i].triangles.empty()) continue;
    instances.push_back(
        {model.link_meshes[i], poses.at(model.chain.links[i].name),
         static_cast<std::uint16_t>(id_base + i)});
  }
  return render_scene(instances, cam, light);
}

/// Appends the robot's posed link meshes to a scene instance list.
inline void append_robot_instances(std::vector<MeshInstance>& scene,
                                   const RobotModel& model,
                                   const JointConfig& q, const Se3Pose& base,
                                   std::uint16_t id_base = 1) {
  auto poses = forward_kinematics(model.chain, q, base);
  for (std::size_t i = 0; i < model.chain.links.size(); ++i) {
    if (model.link_meshes[i].triangles.empty()) continue;
    scene.push_back({model.link_meshes[i], poses.at(model.chain.links[i].name),
                     static_cast<std::uint16_t>(id_base + i)});
  }
}

/// Multiplies rgb inside the instance mask by one factor drawn uniformly
/// from factor_range; depth and mask are untouched.
inline RenderOutput brightness_augment(RenderOutput render,
                                       double factor_lo, double factor_hi,
                                       std::uint64_t seed) {
  if (!(factor_lo > 0) || factor_lo > factor_hi)
    raise(ErrorCode::ConfigError, "brightness range must satisfy 0 < lo <= hi");
  Rng rng(seed);
  double f = rng.uniform(factor_lo, factor_hi);
  for (std::size_t i = 0; i < render.instance_mask.data.size(); ++i) {
    if (render.instance_mask.data[i] == 0) continue;
    for (int c = 0; c < 3; ++c) {
      double v = f * render.rgb.data[i * 3 + c];
      render.rgb.data[i * 3 + c] =
          static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
  }
  return render;
}

}  // namespace duopaint
