#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "duopaint/config.hpp"
#include "duopaint/geometry.hpp"
#include "duopaint/hand.hpp"
#include "duopaint/json_util.hpp"

namespace duopaint {

// On-disk layout: manifest.json at the dataset root, one directory per
// demonstration with frames.jsonl (one frame per line) and images under
// cam_<name>/rgb_<frame>.png, depth_<frame>.png. Background plates live at
// <root>/cam_<name>/plate_rgb.png + plate_depth.png.

struct ObservationRef {
  std::string rgb;    // path relative to the demo directory
  std::string depth;
};

struct RobotState {
  Se3Pose pose;                // EE grasp frame, world
  double gripper_width = 0.0;  // meters
};

struct TrajectoryFrame {
  double timestamp = 0.0;
  std::map<std::string, ObservationRef> observations;  // camera name keyed
  RobotState robot_state;
  std::optional<HandKeypoints> hand_state;  // camera frame
  bool hand_low_fidelity = false;
  std::optional<EndEffectorAction> robot_action;
  std::optional<EndEffectorAction> human_action;
  std::optional<JointConfig> robot_joints;  // recorded when available
};

struct Demonstration {
  std::string id;
  std::string task;
  Side robot_side = Side::Left;
  bool success = true;
  std::vector<TrajectoryFrame> frames;
};

struct BimanualSideState {
  RobotState state;
  EndEffectorAction action;
};

struct BimanualFrame {
  double timestamp = 0.0;
  std::map<std::string, ObservationRef> observations;
  BimanualSideState left;
  BimanualSideState right;
  int source_frame = -1;  // index into the source demonstration
};

struct BimanualDemo {
  std::string id;
  std::string task;
  std::string source_demo;
  Side robot_side = Side::Left;  // which side carried robot provenance
  int drop_count = 0;
  std::vector<BimanualFrame> frames;
};

struct DatasetInfo {
  std::string root;
  std::string kind;  // "source" or "bimanual"
  std::string task;
  std::map<std::string, Camera> cameras;
  json robots = json::object();
  json lineage = json::object();
};

struct DemoIndexEntry {
  std::string id;
  std::string dir;
  Side robot_side = Side::Left;
  bool success = true;
  int frame_count = 0;
};

// --- JSON encoding ----------------------------------------------------------

inline json action_to_json(const EndEffectorAction& a) {
  json j = {{"pose", pose_to_json(a.pose)},
            {"gripper", gripper_state_name(a.gripper)},
            {"provenance", provenance_name(a.provenance)}};
  if (a.width >= 0)
    j["width"] = a.width;
  else
    j["width"] = nullptr;
  return j;
}

inline EndEffectorAction action_from_json(const json& j, const std::string& where) {
  EndEffectorAction a;
  a.pose = pose_from_json(j.at("pose"), where);
  std::string g = j.at("gripper");
  if (g == "open")
    a.gripper = GripperState::Open;
  else if (g == "closed")
    a.gripper = GripperState::Closed;
  else
    raise(ErrorCode::SchemaError, where + ": bad gripper state '" + g + "'");
  std::string p = j.at("provenance");
  if (p == "robot")
    a.provenance = Provenance::Robot;
  else if (p == "human_retargeted")
    a.provenance = Provenance::HumanRetargeted;
  else
    raise(ErrorCode::SchemaError, where + ": bad provenance '" + p + "'");
  a.width = j.contains("width") && !j.at("width").is_null()
                ? j.at("width").get<double>()
                : -1.0;
  return a;
}

inline json frame_to_json(const TrajectoryFrame& f) {
  json obs = json::object();
  for (const auto& [cam, ref] : f.observations)
    obs[cam] = {{"rgb", ref.rgb}, {"depth", ref.depth}};
  json j = {{"t", f.timestamp},
            {"obs", obs},
            {"robot_state",
             {{"pose", pose_to_json(f.robot_state.pose)},
              {"width", f.robot_state.gripper_width}}}};
  if (f.hand_state) {
    j["hand_state"] = keypoints_to_json(*f.hand_state);
    j["hand_state"]["low_fidelity"] = f.hand_low_fidelity;
  }
  if (f.robot_action) j["robot_action"] = action_to_json(*f.robot_action);
  if (f.human_action) j["human_action"] = action_to_json(*f.human_action);
  if (f.robot_joints) j["robot_joints"] = joint_config_to_json(*f.robot_joints);
  return j;
}

inline TrajectoryFrame frame_from_json(const json& j, const std::string& where) {
  TrajectoryFrame f;
  try {
    f.timestamp = j.at("t");
    if (j.contains("obs"))
      for (auto it = j.at("obs").begin(); it != j.at("obs").end(); ++it)
        f.observations[it.key()] = {it.value().at("rgb"), it.value().at("depth")};
    f.robot_state.pose = pose_from_json(j.at("robot_state").at("pose"),
                                        where + " robot_state");
    f.robot_state.gripper_width = j.at("robot_state").at("width");
    if (j.contains("hand_state")) {
      const json& h = j.at("hand_state");
      HandKeypoints kp;
      kp.side = side_from_string(h.at("side"));
      const json& lm = h.at("landmarks");
      if (!lm.is_array() || lm.size() != 21)
        raise(ErrorCode::SchemaError, where + ": hand_state needs 21 landmarks");
      for (int k = 0; k < 21; ++k)
        kp.landmarks[k] = Vec3(lm[k].at(0), lm[k].at(1), lm[k].at(2));
      f.hand_state = kp;
      f.hand_low_fidelity = h.value("low_fidelity", false);
    }
    if (j.contains("robot_action"))
      f.robot_action = action_from_json(j.at("robot_action"), where + " robot_action");
    if (j.contains("human_action"))
      f.human_action = action_from_json(j.at("human_action"), where + " human_action");
    if (j.contains("robot_joints"))
      f.robot_joints = joint_config_from_json(j.at("robot_joints"));
  } catch (const json::exception& e) {
    raise(ErrorCode::SchemaError, where + ": " + e.what());
  }
  return f;
}

inline json bimanual_frame_to_json(const BimanualFrame& f) {
  json obs = json::object();
  for (const auto& [cam, ref] : f.observations)
    obs[cam] = {{"rgb", ref.rgb}, {"depth", ref.depth}};
  auto side = [](const BimanualSideState& s) {
    return json{{"state",
                 {{"pose", pose_to_json(s.state.pose)},
                  {"width", s.state.gripper_width}}},
                {"action", action_to_json(s.action)}};
  };
  return {{"t", f.timestamp},
          {"obs", obs},
          {"left", side(f.left)},
          {"right", side(f.right)},
          {"source_frame", f.source_frame}};
}

inline BimanualFrame bimanual_frame_from_json(const json& j,
                                              const std::string& where) {
  BimanualFrame f;
  try {
    f.timestamp = j.at("t");
    if (j.contains("obs"))
      for (auto it = j.at("obs").begin(); it != j.at("obs").end(); ++it)
        f.observations[it.key()] = {it.value().at("rgb"), it.value().at("depth")};
    auto side = [&](const json& s, const std::string& name) {
      BimanualSideState out;
      out.state.pose =
          pose_from_json(s.at("state").at("pose"), where + " " + name);
      out.state.gripper_width = s.at("state").at("width");
      out.action = action_from_json(s.at("action"), where + " " + name);
      return out;
    };
    f.left = side(j.at("left"), "left");
    f.right = side(j.at("right"), "right");
    f.source_frame = j.value("source_frame", -1);
  } catch (const json::exception& e) {
    raise(ErrorCode::SchemaError, where + ": " + e.what());
  }
  return f;
}

// --- loading and validation -------------------------------------------------

namespace detail {

inline json load_manifest(const std::string& root) {
  auto path = std::filesystem::path(root) / "manifest.json";
  if (!std::filesystem::exists(path))
    raise(ErrorCode::ManifestError, "no manifest.json under " + root);
  json m = json::parse(read_text_file(path.string()), nullptr, false);
  if (m.is_discarded())
    raise(ErrorCode::ManifestError, "manifest.json is not valid JSON");
  return m;
}

inline DatasetInfo info_from_manifest(const json& m, const std::string& root) {
  DatasetInfo info;
  info.root = root;
  try {
    info.kind = m.value("kind", std::string("source"));
    info.task = m.value("task", std::string(""));
    if (m.contains("cameras"))
      for (auto it = m.at("cameras").begin(); it != m.at("cameras").end(); ++it)
        info.cameras[it.key()] = camera_from_json(it.value());
    info.robots = m.value("robots", json::object());
    info.lineage = m.value("lineage", json::object());
  } catch (const json::exception& e) {
    raise(ErrorCode::ManifestError, std::string("manifest: ") + e.what());
  }
  return info;
}

inline std::vector<DemoIndexEntry> demo_index(const json& m) {
  std::vector<DemoIndexEntry> out;
  if (!m.contains("demos")) return out;
  for (const auto& d : m.at("demos")) {
    DemoIndexEntry e;
    try {
      e.id = d.at("id");
      e.dir = d.at("dir");
      e.robot_side = side_from_string(d.at("robot_side"));
      e.success = d.value("success", true);
      e.frame_count = d.value("frames", 0);
    } catch (const json::exception& ex) {
      raise(ErrorCode::ManifestError, std::string("demo index: ") + ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  std::vector<json> lines;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      raise(ErrorCode::SchemaError,
            path + ":" + std::to_string(n) + ": invalid JSON");
    lines.push_back(std::move(j));
  }
  return lines;
}

}  // namespace detail

struct SourceDataset {
  DatasetInfo info;
  std::vector<Demonstration> demos;
};

struct BimanualDataset {
  DatasetInfo info;
  std::vector<BimanualDemo> demos;
};

/// Loads and validates a source dataset. Schema violations carry a
/// file/frame locus in the message.
inline SourceDataset load_dataset(const std::string& root) {
  json m = detail::load_manifest(root);
  SourceDataset ds;
  ds.info = detail::info_from_manifest(m, root);
  if (ds.info.kind != "source")
    raise(ErrorCode::ManifestError,
          "expected a source dataset, found kind '" + ds.info.kind + "'");
  for (const auto& entry : detail::demo_index(m)) {
    Demonstration demo;
    demo.id = entry.id;
    demo.task = ds.info.task;
    demo.robot_side = entry.robot_side;
    demo.success = entry.success;
    auto frames_path =
        std::filesystem::path(root) / entry.dir / "frames.jsonl";
    auto lines = detail::read_jsonl(frames_path.string());
    double prev_t = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string where = entry.id + " frame " + std::to_string(i);
      TrajectoryFrame f = frame_from_json(lines[i], where);
      if (!(f.timestamp > prev_t))
        raise(ErrorCode::SchemaError,
              where + ": timestamps must be strictly increasing");
      prev_t = f.timestamp;
      demo.frames.push_back(std::move(f));
    }
    ds.demos.push_back(std::move(demo));
  }
  return ds;
}

inline BimanualDataset load_bimanual_dataset(const std::string& root) {
  json m = detail::load_manifest(root);
  BimanualDataset ds;
  ds.info = detail::info_from_manifest(m, root);
  if (ds.info.kind != "bimanual")
    raise(ErrorCode::ManifestError,
          "expected a bimanual dataset, found kind '" + ds.info.kind + "'");
  auto entries = detail::demo_index(m);
  json lineage_demos = m.value("demo_lineage", json::object());
  for (const auto& entry : entries) {
    BimanualDemo demo;
    demo.id = entry.id;
    demo.task = ds.info.task;
    demo.robot_side = entry.robot_side;
    if (lineage_demos.contains(entry.id)) {
      demo.source_demo = lineage_demos.at(entry.id).value("source_demo", "");
      demo.drop_count = lineage_demos.at(entry.id).value("drop_count", 0);
    }
    auto frames_path =
        std::filesystem::path(root) / entry.dir / "frames.jsonl";
    auto lines = detail::read_jsonl(frames_path.string());
    double prev_t = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string where = entry.id + " frame " + std::to_string(i);
      BimanualFrame f = bimanual_frame_from_json(lines[i], where);
      if (!(f.timestamp > prev_t))
        raise(ErrorCode::SchemaError,
              where + ": timestamps must be strictly increasing");
      prev_t = f.timestamp;
      demo.frames.push_back(std::move(f));
    }
    ds.demos.push_back(std::move(demo));
  }
  return ds;
}

// --- operations --------------------------------------------------------------

/// Left-multiplies every pose and action by T; observations untouched.
inline Demonstration align_frames(Demonstration demo, const Se3Pose& t) {
  for (auto& f : demo.frames) {
    f.robot_state.pose = compose(t, f.robot_state.pose);
    if (f.robot_action) f.robot_action->pose = compose(t, f.robot_action->pose);
    if (f.human_action) f.human_action->pose = compose(t, f.human_action->pose);
  }
  return demo;
}

struct BalanceReport {
  struct Entry {
    std::string task;
    int left = 0;
    int right = 0;
  };
  std::vector<Entry> per_task;
  bool balanced = true;
  int tolerance = 0;
  bool empty = false;

  std::string summary() const {
    std::string s;
    for (const auto& e : per_task) {
      s += e.task + ": " + std::to_string(e.left) + " left / " +
           std::to_string(e.right) + " right";
      if (std::abs(e.left - e.right) > tolerance) s += " [IMBALANCED]";
      s += "\n";
    }
    if (empty) s += "(no demonstrations)\n";
    return s;
  }
};

/// Counts demonstrations per (task, robot_side) and flags any imbalance
/// beyond the tolerance. The role-alternation convention wants N per side.
inline BalanceReport check_balance(const std::vector<Demonstration>& demos,
                                   int tolerance = 0) {
  BalanceReport report;
  report.tolerance = tolerance;
  report.empty = demos.empty();
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& d : demos) {
    auto& c = counts[d.task];
    (d.robot_side == Side::Left ? c.first : c.second) += 1;
  }
  for (const auto& [task, c] : counts) {
    report.per_task.push_back({task, c.first, c.second});
    if (std::abs(c.first - c.second) > tolerance) report.balanced = false;
  }
  return report;
}

/// Assembles bimanual frames: the demo's robot side carries the recorded
/// robot state/action, the other side the human-retargeted action. Frames
/// flagged low-fidelity are dropped unless keep_flagged is set.
inline std::pair<std::vector<BimanualFrame>, int> mix_bimanual(
    const Demonstration& demo, double open_width = 0.08,
    double closed_width = 0.0, bool keep_flagged = false) {
  std::vector<BimanualFrame> out;
  int dropped = 0;
  for (std::size_t i = 0; i < demo.frames.size(); ++i) {
    const TrajectoryFrame& f = demo.frames[i];
    if (!f.robot_action)
      raise(ErrorCode::MissingAction,
            demo.id + " frame " + std::to_string(i) + " lacks robot_action");
    if (!f.human_action)
      raise(ErrorCode::MissingAction,
            demo.id + " frame " + std::to_string(i) + " lacks human_action");
    if (f.hand_low_fidelity && !keep_flagged) {
      ++dropped;
      continue;
    }
    BimanualFrame b;
    b.timestamp = f.timestamp;
    b.observations = f.observations;
    b.source_frame = static_cast<int>(i);

    BimanualSideState robot_side_state;
    robot_side_state.state = f.robot_state;
    robot_side_state.action = *f.robot_action;

    BimanualSideState human_side_state;
    human_side_state.action = *f.human_action;
    human_side_state.state.pose = f.human_action->pose;
    human_side_state.state.gripper_width =
        f.human_action->gripper == GripperState::Open ? open_width
                                                      : closed_width;

    if (demo.robot_side == Side::Left) {
      b.left = robot_side_state;
      b.right = human_side_state;
    } else {
      b.left = human_side_state;
      b.right = robot_side_state;
    }
    out.push_back(std::move(b));
  }
  return {out, dropped};
}

/// Exactly one side with robot provenance and the other human-retargeted.
inline bool provenance_invariant(const BimanualFrame& f) {
  return (f.left.action.provenance == Provenance::Robot) !=
         (f.right.action.provenance == Provenance::Robot);
}

// --- export -------------------------------------------------------------------

struct ExportDemo {
  BimanualDemo demo;
  json fidelity = json::object();  // per-demo fidelity report, written beside
};

/// Writes the bimanual on-disk layout. Images must already sit in the demo
/// directories; the manifest is written last via atomic rename so a partial
/// export never looks complete.
inline std::string export_augmented(const std::string& out_root,
                                    const DatasetInfo& source_info,
                                    const json& robots,
                                    const std::vector<ExportDemo>& demos,
                                    const json& lineage) {
  namespace fs = std::filesystem;
  fs::create_directories(out_root);
  json demo_entries = json::array();
  json demo_lineage = json::object();
  for (const auto& e : demos) {
    std::string dir = "demos/" + e.demo.id;
    fs::create_directories(fs::path(out_root) / dir);
    std::ofstream jl(fs::path(out_root) / dir / "frames.jsonl",
                     std::ios::binary | std::ios::trunc);
    if (!jl) raise(ErrorCode::IoError, "cannot write frames.jsonl for " + e.demo.id);
    for (const auto& f : e.demo.frames) jl << bimanual_frame_to_json(f).dump() << "\n";
    jl.close();
    if (!e.fidelity.empty())
      write_text_file((fs::path(out_root) / dir / "fidelity.json").string(),
                      e.fidelity.dump(2) + "\n");
    demo_entries.push_back({{"id", e.demo.id},
                            {"dir", dir},
                            {"robot_side", side_name(e.demo.robot_side)},
                            {"success", true},
                            {"frames", static_cast<int>(e.demo.frames.size())}});
    demo_lineage[e.demo.id] = {{"source_demo", e.demo.source_demo},
                               {"drop_count", e.demo.drop_count}};
  }
  json cameras = json::object();
  for (const auto& [name, cam] : source_info.cameras)
    cameras[name] = camera_to_json(cam);
  json manifest = {{"format", "duopaint-dataset"},
                   {"version", 1},
                   {"kind", "bimanual"},
                   {"task", source_info.task},
                   {"cameras", cameras},
                   {"robots", robots},
                   {"demos", demo_entries},
                   {"demo_lineage", demo_lineage},
                   {"lineage", lineage}};
  std::string path = (fs::path(out_root) / "manifest.json").string();
  write_text_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

/// Writes a source-kind dataset (used by the synthesizer and the retarget
/// stage). Demo images must already be in place.
inline std::string export_source(const std::string& out_root,
                                 const DatasetInfo& info,
                                 const std::vector<Demonstration>& demos,
                                 const json& lineage = json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(out_root);
  json demo_entries = json::array();
  for (const auto& d : demos) {
    std::string dir = "demos/" + d.id;
    fs::create_directories(fs::path(out_root) / dir);
    std::ofstream jl(fs::path(out_root) / dir / "frames.jsonl",
                     std::ios::binary | std::ios::trunc);
    if (!jl) raise(ErrorCode::IoError, "cannot write frames.jsonl for " + d.id);
    for (const auto& f : d.frames) jl << frame_to_json(f).dump() << "\n";
    jl.close();
    demo_entries.push_back({{"id", d.id},
                            {"dir", dir},
                            {"robot_side", side_name(d.robot_side)},
                            {"success", d.success},
                            {"frames", static_cast<int>(d.frames.size())}});
  }
  json cameras = json::object();
  for (const auto& [name, cam] : info.cameras) cameras[name] = camera_to_json(cam);
  json manifest = {{"format", "duopaint-dataset"},
                   {"version", 1},
                   {"kind", "source"},
                   {"task", info.task},
                   {"cameras", cameras},
                   {"robots", info.robots},
                   {"demos", demo_entries},
                   {"lineage", lineage}};
  std::string path = (fs::path(out_root) / "manifest.json").string();
  write_text_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace duopaint
