#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"

namespace duopaint {

using nlohmann::json;

/// Pose wire format: 7-vector [tx,ty,tz,qw,qx,qy,qz].
inline json pose_to_json(const Se3Pose& p) {
  return json::array({p.t.x(), p.t.y(), p.t.z(), p.q.w(), p.q.x(), p.q.y(),
                      p.q.z()});
}

inline Se3Pose pose_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 7)
    raise(ErrorCode::SchemaError, where + ": pose must be a 7-vector");
  for (const auto& v : j)
    if (!v.is_number())
      raise(ErrorCode::SchemaError, where + ": pose holds non-numeric value");
  return Se3Pose(Vec3(j[0], j[1], j[2]),
                 Quat(j[3], j[4], j[5], j[6]));
}

/// Calibration manifest fields: fx, fy, cx, cy, width, height,
/// extrinsic: {t:[3], q:[4]} with q in (w,x,y,z) order.
inline json camera_to_json(const Camera& cam) {
  return {{"fx", cam.intrinsics.fx},
          {"fy", cam.intrinsics.fy},
          {"cx", cam.intrinsics.cx},
          {"cy", cam.intrinsics.cy},
          {"width", cam.intrinsics.width},
          {"height", cam.intrinsics.height},
          {"extrinsic",
           {{"t", {cam.extrinsic.t.x(), cam.extrinsic.t.y(), cam.extrinsic.t.z()}},
            {"q",
             {cam.extrinsic.q.w(), cam.extrinsic.q.x(), cam.extrinsic.q.y(),
              cam.extrinsic.q.z()}}}}};
}

inline Camera camera_from_json(const json& j) {
  Camera cam;
  try {
    cam.intrinsics.fx = j.at("fx");
    cam.intrinsics.fy = j.at("fy");
    cam.intrinsics.cx = j.at("cx");
    cam.intrinsics.cy = j.at("cy");
    cam.intrinsics.width = j.at("width");
    cam.intrinsics.height = j.at("height");
    const auto& e = j.at("extrinsic");
    const auto& t = e.at("t");
    const auto& q = e.at("q");
    cam.extrinsic = Se3Pose(Vec3(t.at(0), t.at(1), t.at(2)),
                            Quat(q.at(0), q.at(1), q.at(2), q.at(3)));
  } catch (const json::exception& e) {
    raise(ErrorCode::SchemaError, std::string("camera calibration: ") + e.what());
  }
  cam.intrinsics.validate();
  return cam;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) raise(ErrorCode::IoError, "short write to " + path);
}

/// Write via temp file + rename so readers never observe a partial file.
inline void write_text_file_atomic(const std::string& path,
                                   const std::string& text) {
  std::string tmp = path + ".tmp";
  write_text_file(tmp, text);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::IoError, "rename " + tmp + " -> " + path);
}

inline json load_json_file(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "invalid JSON in " + path);
  return j;
}

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Stable content hash of a JSON document. nlohmann objects iterate in sorted
/// key order and dump() emits shortest round-trip decimals, so the dump is
/// canonical.
inline std::string json_hash(const json& j) {
  std::string s = j.dump();
  return hex64(fnv1a64(s.data(), s.size()));
}

inline std::string file_hash(const std::string& path) {
  std::string s = read_text_file(path);
  return hex64(fnv1a64(s.data(), s.size()));
}

}  // namespace duopaint
