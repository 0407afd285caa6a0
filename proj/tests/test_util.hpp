#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

// shared helpers for the integration-ish suites

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Byte compare two directory trees; returns the first differing relative
/// path, or empty when identical.
inline std::string first_tree_difference(const std::filesystem::path& a,
                                         const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  std::set<std::string> rel_a, rel_b;
  for (auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel_a.insert(fs::relative(e.path(), a).string());
  for (auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.insert(fs::relative(e.path(), b).string());
  if (rel_a != rel_b) {
    for (const auto& r : rel_a)
      if (!rel_b.count(r)) return "only in first: " + r;
    for (const auto& r : rel_b)
      if (!rel_a.count(r)) return "only in second: " + r;
  }
  for (const auto& r : rel_a)
    if (slurp(a / r) != slurp(b / r)) return r;
  return "";
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};
