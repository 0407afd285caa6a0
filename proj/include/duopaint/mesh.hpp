#pragma once

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"
#include "duopaint/pointcloud.hpp"

namespace duopaint {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> triangles;
  Vec3 color = Vec3(0.7, 0.7, 0.7);  // uniform, linear [0,1]
  std::vector<Vec3> face_colors;     // optional per-face override

  Vec3 face_color(int face) const {
    return face_colors.empty() ? color : face_colors[face];
  }

  /// Drops zero-area and out-of-range triangles; load-time cleanup so the
  /// rasterizer can assume well-formed faces.
  void cleanup() {
    std::vector<Eigen::Vector3i> kept;
    std::vector<Vec3> kept_colors;
    const int n = static_cast<int>(vertices.size());
    for (std::size_t f = 0; f < triangles.size(); ++f) {
      const auto& t = triangles[f];
      if (t.x() < 0 || t.y() < 0 || t.z() < 0 || t.x() >= n || t.y() >= n ||
          t.z() >= n)
        continue;
      Vec3 cross = (vertices[t.y()] - vertices[t.x()])
                       .cross(vertices[t.z()] - vertices[t.x()]);
      if (cross.squaredNorm() < 1e-24) continue;
      kept.push_back(t);
      if (!face_colors.empty()) kept_colors.push_back(face_colors[f]);
    }
    triangles = std::move(kept);
    face_colors = std::move(kept_colors);
  }
};

inline TriangleMesh transform_mesh(const Se3Pose& pose, TriangleMesh mesh) {
  for (auto& v : mesh.vertices) v = transform_point(pose, v);
  return mesh;
}

inline void append_mesh(TriangleMesh& dst, const TriangleMesh& src) {
  int base = static_cast<int>(dst.vertices.size());
  // keep per-face colors consistent when either side uses them
  if (dst.face_colors.empty() && !src.face_colors.empty())
    dst.face_colors.assign(dst.triangles.size(), dst.color);
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(),
                      src.vertices.end());
  for (const auto& t : src.triangles)
    dst.triangles.emplace_back(t.x() + base, t.y() + base, t.z() + base);
  if (!dst.face_colors.empty())
    for (std::size_t f = 0; f < src.triangles.size(); ++f)
      dst.face_colors.push_back(src.face_color(static_cast<int>(f)));
}

// --- primitive tessellation (URDF visuals go through one geometry path) ---

/// Axis-aligned box centered at the origin; 12 triangles.
inline TriangleMesh make_box(const Vec3& size) {
  TriangleMesh m;
  Vec3 h = size / 2.0;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(),
                            i & 4 ? h.z() : -h.z());
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.triangles.emplace_back(q[0], q[1], q[2]);
    m.triangles.emplace_back(q[0], q[2], q[3]);
  }
  return m;
}

/// Cylinder along +z centered at the origin.
inline TriangleMesh make_cylinder(double radius, double length,
                                  int segments = 32) {
  TriangleMesh m;
  double hz = length / 2.0;
  for (int ring = 0; ring < 2; ++ring) {
    double z = ring ? hz : -hz;
    for (int i = 0; i < segments; ++i) {
      double a = 2.0 * M_PI * i / segments;
      m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  int bot_center = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, -hz);
  int top_center = bot_center + 1;
  m.vertices.emplace_back(0, 0, hz);
  for (int i = 0; i < segments; ++i) {
    int j = (i + 1) % segments;
    m.triangles.emplace_back(i, j, segments + j);
    m.triangles.emplace_back(i, segments + j, segments + i);
    m.triangles.emplace_back(bot_center, j, i);
    m.triangles.emplace_back(top_center, segments + i, segments + j);
  }
  return m;
}

/// UV sphere centered at the origin.
inline TriangleMesh make_sphere(double radius, int segments = 32,
                                int rings = 16) {
  TriangleMesh m;
  for (int r = 0; r <= rings; ++r) {
    double phi = M_PI * r / rings;  // 0 at +z pole
    for (int s = 0; s < segments; ++s) {
      double theta = 2.0 * M_PI * s / segments;
      m.vertices.emplace_back(radius * std::sin(phi) * std::cos(theta),
                              radius * std::sin(phi) * std::sin(theta),
                              radius * std::cos(phi));
    }
  }
  auto idx = [&](int r, int s) { return r * segments + (s % segments); };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      m.triangles.emplace_back(idx(r, s), idx(r, s + 1), idx(r + 1, s + 1));
      m.triangles.emplace_back(idx(r, s), idx(r + 1, s + 1), idx(r + 1, s));
    }
  }
  m.cleanup();  // pole rows produce degenerate faces
  return m;
}

/// Flat rectangle in the z=0 plane split into a checkerboard of cells with
/// two alternating face colors; serves as the textured table plane.
inline TriangleMesh make_checker_plane(double size_x, double size_y, int cells,
                                       const Vec3& color_a,
                                       const Vec3& color_b) {
  TriangleMesh m;
  for (int j = 0; j <= cells; ++j)
    for (int i = 0; i <= cells; ++i)
      m.vertices.emplace_back(size_x * (double(i) / cells - 0.5),
                              size_y * (double(j) / cells - 0.5), 0.0);
  auto idx = [&](int i, int j) { return j * (cells + 1) + i; };
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      Vec3 c = ((i + j) % 2 == 0) ? color_a : color_b;
      m.triangles.emplace_back(idx(i, j), idx(i + 1, j), idx(i + 1, j + 1));
      m.face_colors.push_back(c);
      m.triangles.emplace_back(idx(i, j), idx(i + 1, j + 1), idx(i, j + 1));
      m.face_colors.push_back(c);
    }
  }
  return m;
}

// --- OBJ / PLY mesh I/O (triangulated) ---

inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  TriangleMesh m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z()))
        raise(ErrorCode::ParseError, path + ": bad vertex line");
      m.vertices.push_back(v);
    } else if (tok == "f") {
      std::vector<int> ids;
      std::string ref;
      while (ls >> ref) {
        // accept v, v/vt, v//vn, v/vt/vn
        ids.push_back(std::stoi(ref.substr(0, ref.find('/'))) - 1);
      }
      if (ids.size() < 3)
        raise(ErrorCode::ParseError, path + ": face with < 3 vertices");
      for (std::size_t k = 2; k < ids.size(); ++k)
        m.triangles.emplace_back(ids[0], ids[k - 1], ids[k]);
    }
  }
  m.cleanup();
  return m;
}

inline void save_obj(const std::string& path, const TriangleMesh& m) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out.precision(9);
  for (const auto& v : m.vertices)
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : m.triangles)
    out << "f " << t.x() + 1 << ' ' << t.y() + 1 << ' ' << t.z() + 1 << '\n';
}

inline TriangleMesh load_ply_mesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  auto h = detail::parse_ply_header(in, path);
  int ix = -1, iy = -1, iz = -1;
  for (int i = 0; i < static_cast<int>(h.vertex_props.size()); ++i) {
    if (h.vertex_props[i] == "x") ix = i;
    if (h.vertex_props[i] == "y") iy = i;
    if (h.vertex_props[i] == "z") iz = i;
  }
  if (ix < 0 || iy < 0 || iz < 0)
    raise(ErrorCode::ParseError, path + ": PLY lacks x/y/z properties");

  TriangleMesh m;
  std::vector<float> row(h.vertex_props.size());
  for (std::size_t v = 0; v < h.vertex_count; ++v) {
    if (h.binary) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
    } else {
      for (auto& f : row)
        if (!(in >> f)) raise(ErrorCode::ParseError, path + ": truncated PLY");
    }
    m.vertices.emplace_back(row[ix], row[iy], row[iz]);
  }
  for (std::size_t f = 0; f < h.face_count; ++f) {
    if (h.binary) {
      std::uint8_t n = 0;
      in.read(reinterpret_cast<char*>(&n), 1);
      std::vector<std::int32_t> ids(n);
      in.read(reinterpret_cast<char*>(ids.data()), n * 4);
      if (!in) raise(ErrorCode::ParseError, path + ": truncated PLY faces");
      for (std::size_t k = 2; k < ids.size(); ++k)
        m.triangles.emplace_back(ids[0], ids[k - 1], ids[k]);
    } else {
      int n;
      if (!(in >> n)) raise(ErrorCode::ParseError, path + ": truncated PLY faces");
      std::vector<int> ids(n);
      for (auto& id : ids) in >> id;
      for (std::size_t k = 2; k < ids.size(); ++k)
        m.triangles.emplace_back(ids[0], ids[k - 1], ids[k]);
    }
  }
  m.cleanup();
  return m;
}

inline void save_ply_mesh(const std::string& path, const TriangleMesh& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << m.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "element face " << m.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : m.vertices) {
    float f[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                  static_cast<float>(v.z())};
    out.write(reinterpret_cast<const char*>(f), sizeof f);
  }
  for (const auto& t : m.triangles) {
    std::uint8_t n = 3;
    std::int32_t ids[3] = {t.x(), t.y(), t.z()};
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(ids), sizeof ids);
  }
}

}  // namespace duopaint
