#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"

namespace duopaint {

struct PointCloud {
  std::vector<Vec3> points;   // meters
  std::vector<Vec3> normals;  // optional; unit-norm when present

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void validate() const {
    for (const auto& p : points)
      if (!p.allFinite())
        raise(ErrorCode::SchemaError, "point cloud holds non-finite point");
    if (has_normals()) {
      if (normals.size() != points.size())
        raise(ErrorCode::SchemaError, "normal count != point count");
      for (const auto& n : normals)
        if (std::abs(n.norm() - 1.0) > 1e-6)
          raise(ErrorCode::SchemaError, "normal is not unit length");
    }
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return points.empty() ? c : Vec3(c / double(points.size()));
  }
};

inline PointCloud transform_cloud(const Se3Pose& pose, const PointCloud& in) {
  PointCloud out;
  out.points.reserve(in.points.size());
  for (const auto& p : in.points) out.points.push_back(transform_point(pose, p));
  out.normals.reserve(in.normals.size());
  for (const auto& n : in.normals) out.normals.push_back(pose.q * n);
  return out;
}

// --- PLY I/O: x,y,z (+ optional nx,ny,nz), ASCII or binary_little_endian ---

inline void save_ply(const std::string& path, const PointCloud& cloud,
                     bool binary = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out.precision(9);  // float32 survives the ascii round trip
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
      << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_normals())
    out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    float v[6] = {static_cast<float>(cloud.points[i].x()),
                  static_cast<float>(cloud.points[i].y()),
                  static_cast<float>(cloud.points[i].z()), 0, 0, 0};
    int n = 3;
    if (cloud.has_normals()) {
      v[3] = static_cast<float>(cloud.normals[i].x());
      v[4] = static_cast<float>(cloud.normals[i].y());
      v[5] = static_cast<float>(cloud.normals[i].z());
      n = 6;
    }
    if (binary) {
      out.write(reinterpret_cast<const char*>(v), n * sizeof(float));
    } else {
      for (int k = 0; k < n; ++k) out << v[k] << (k + 1 == n ? '\n' : ' ');
    }
  }
}

namespace detail {

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<std::string> vertex_props;
  std::size_t face_count = 0;
  std::string face_line;  // face element property line, if any
};

inline PlyHeader parse_ply_header(std::istream& in, const std::string& path) {
  PlyHeader h;
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0)
    raise(ErrorCode::ParseError, path + ": missing ply magic");
  std::string element;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian")
        h.binary = true;
      else if (fmt != "ascii")
        raise(ErrorCode::ParseError, path + ": unsupported PLY format " + fmt);
    } else if (tok == "element") {
      std::size_t n;
      ls >> element >> n;
      if (element == "vertex") h.vertex_count = n;
      if (element == "face") h.face_count = n;
    } else if (tok == "property") {
      if (element == "vertex") {
        std::string type, name;
        ls >> type >> name;
        if (type != "float" && type != "float32")
          raise(ErrorCode::ParseError,
                path + ": only float vertex properties supported");
        h.vertex_props.push_back(name);
      } else if (element == "face") {
        h.face_line = line;
      }
    } else if (tok == "end_header") {
      return h;
    }
  }
  raise(ErrorCode::ParseError, path + ": unterminated PLY header");
}

}  // namespace detail

inline PointCloud load_ply_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  auto h = detail::parse_ply_header(in, path);
  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (int i = 0; i < static_cast<int>(h.vertex_props.size()); ++i) {
    const auto& n = h.vertex_props[i];
    if (n == "x") ix = i;
    if (n == "y") iy = i;
    if (n == "z") iz = i;
    if (n == "nx") inx = i;
    if (n == "ny") iny = i;
    if (n == "nz") inz = i;
  }
  if (ix < 0 || iy < 0 || iz < 0)
    raise(ErrorCode::ParseError, path + ": PLY lacks x/y/z properties");
  bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(h.vertex_count);
  std::vector<float> row(h.vertex_props.size());
  for (std::size_t v = 0; v < h.vertex_count; ++v) {
    if (h.binary) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
      if (!in) raise(ErrorCode::ParseError, path + ": truncated PLY data");
    } else {
      for (auto& f : row)
        if (!(in >> f)) raise(ErrorCode::ParseError, path + ": truncated PLY data");
    }
    cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (with_normals) cloud.normals.emplace_back(row[inx], row[iny], row[inz]);
  }
  cloud.validate();
  return cloud;
}

}  // namespace duopaint
