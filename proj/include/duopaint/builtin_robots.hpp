#pragma once

#include <sstream>
#include <string>

#include "duopaint/kinematics.hpp"

namespace duopaint {

/// Parameterized 6-DoF arm + parallel-jaw gripper used as the built-in
/// source and target robots. Plain serial chain: pan / pitch / pitch wrist
/// roll-pitch-roll, prismatic fingers riding on the palm.
struct ArmStyle {
  std::string name = "arm";
  double shoulder = 0.10;
  double upper_arm = 0.30;
  double forearm = 0.25;
  double wrist1 = 0.08;
  double wrist2 = 0.07;
  double finger_travel = 0.04;  // per finger; max width = 2 * travel
  std::string body_rgba = "0.85 0.45 0.10 1";
  std::string trim_rgba = "0.25 0.25 0.28 1";
};

inline ArmStyle source_arm_style() {
  ArmStyle s;
  s.name = "source_arm";
  return s;
}

inline ArmStyle target_arm_style() {
  ArmStyle s;
  s.name = "target_arm";
  s.upper_arm = 0.34;
  s.forearm = 0.29;
  s.body_rgba = "0.45 0.55 0.70 1";
  s.trim_rgba = "0.15 0.15 0.18 1";
  return s;
}

inline std::string arm_urdf(const ArmStyle& s) {
  std::ostringstream o;
  o.precision(6);
  auto link_box = [&](const std::string& name, double x, double y, double z,
                      double oz, const std::string& rgba) {
    o << "  <link name=\"" << name << "\">\n"
      << "    <visual>\n"
      << "      <origin xyz=\"0 0 " << oz << "\"/>\n"
      << "      <geometry><box size=\"" << x << ' ' << y << ' ' << z
      << "\"/></geometry>\n"
      << "      <material name=\"m_" << name << "\"><color rgba=\"" << rgba
      << "\"/></material>\n"
      << "    </visual>\n  </link>\n";
  };
  auto link_cyl = [&](const std::string& name, double r, double l, double oz,
                      const std::string& rgba) {
    o << "  <link name=\"" << name << "\">\n"
      << "    <visual>\n"
      << "      <origin xyz=\"0 0 " << oz << "\"/>\n"
      << "      <geometry><cylinder radius=\"" << r << "\" length=\"" << l
      << "\"/></geometry>\n"
      << "      <material name=\"m_" << name << "\"><color rgba=\"" << rgba
      << "\"/></material>\n"
      << "    </visual>\n  </link>\n";
  };
  auto joint = [&](const std::string& name, const std::string& type,
                   const std::string& parent, const std::string& child,
                   double oz, const std::string& axis, double lo, double hi) {
    o << "  <joint name=\"" << name << "\" type=\"" << type << "\">\n"
      << "    <origin xyz=\"0 0 " << oz << "\"/>\n"
      << "    <parent link=\"" << parent << "\"/>\n"
      << "    <child link=\"" << child << "\"/>\n";
    if (type != "fixed")
      o << "    <axis xyz=\"" << axis << "\"/>\n"
        << "    <limit lower=\"" << lo << "\" upper=\"" << hi
        << "\" effort=\"100\" velocity=\"2\"/>\n";
    o << "  </joint>\n";
  };

  o << "<robot name=\"" << s.name << "\">\n";
  link_box("base_link", 0.14, 0.14, 0.06, 0.03, s.trim_rgba);
  joint("joint_1", "revolute", "base_link", "shoulder_link", 0.06, "0 0 1",
        -2.9, 2.9);
  link_cyl("shoulder_link", 0.050, s.shoulder, s.shoulder / 2, s.body_rgba);
  joint("joint_2", "revolute", "shoulder_link", "upper_arm_link", s.shoulder,
        "0 1 0", -2.2, 2.2);
  link_box("upper_arm_link", 0.06, 0.06, s.upper_arm, s.upper_arm / 2,
           s.body_rgba);
  joint("joint_3", "revolute", "upper_arm_link", "forearm_link", s.upper_arm,
        "0 1 0", -2.6, 2.6);
  link_box("forearm_link", 0.05, 0.05, s.forearm, s.forearm / 2, s.body_rgba);
  joint("joint_4", "revolute", "forearm_link", "wrist_1_link", s.forearm,
        "0 0 1", -2.9, 2.9);
  link_cyl("wrist_1_link", 0.040, s.wrist1, s.wrist1 / 2, s.body_rgba);
  joint("joint_5", "revolute", "wrist_1_link", "wrist_2_link", s.wrist1,
        "0 1 0", -2.0, 2.0);
  link_cyl("wrist_2_link", 0.035, s.wrist2, s.wrist2 / 2, s.body_rgba);
  joint("joint_6", "revolute", "wrist_2_link", "flange_link", s.wrist2,
        "0 0 1", -2.9, 2.9);
  link_cyl("flange_link", 0.030, 0.02, 0.01, s.trim_rgba);
  joint("palm_joint", "fixed", "flange_link", "palm_link", 0.02, "", 0, 0);
  link_box("palm_link", 0.08, 0.10, 0.03, 0.015, s.trim_rgba);
  joint("finger_left_joint", "prismatic", "palm_link", "finger_left_link",
        0.03, "0 1 0", 0, s.finger_travel);
  joint("finger_right_joint", "prismatic", "palm_link", "finger_right_link",
        0.03, "0 -1 0", 0, s.finger_travel);
  // finger boxes sit so the inner faces touch at zero width
  o << "  <link name=\"finger_left_link\">\n    <visual>\n"
    << "      <origin xyz=\"0 0.005 0.03\"/>\n"
    << "      <geometry><box size=\"0.014 0.01 0.06\"/></geometry>\n"
    << "      <material name=\"m_fl\"><color rgba=\"" << s.trim_rgba
    << "\"/></material>\n    </visual>\n  </link>\n";
  o << "  <link name=\"finger_right_link\">\n    <visual>\n"
    << "      <origin xyz=\"0 -0.005 0.03\"/>\n"
    << "      <geometry><box size=\"0.014 0.01 0.06\"/></geometry>\n"
    << "      <material name=\"m_fr\"><color rgba=\"" << s.trim_rgba
    << "\"/></material>\n    </visual>\n  </link>\n";
  joint("grasp_joint", "fixed", "palm_link", "grasp_frame", 0.085, "", 0, 0);
  // small tool-center marker so the grasp point has its own mask id
  o << "  <link name=\"grasp_frame\">\n    <visual>\n"
    << "      <geometry><sphere radius=\"0.008\"/></geometry>\n"
    << "      <material name=\"m_tcp\"><color rgba=\"0.9 0.85 0.2 1\"/></material>\n"
    << "    </visual>\n  </link>\n";
  o << "</robot>\n";
  return o.str();
}

inline GripperWidthMap arm_gripper_map(const ArmStyle& s) {
  GripperWidthMap map;
  map.max_width = 2.0 * s.finger_travel;
  map.fingers = {{"finger_left_joint", 0.0, s.finger_travel},
                 {"finger_right_joint", 0.0, s.finger_travel}};
  return map;
}

inline JointConfig arm_home_config() {
  JointConfig q;
  q.set("joint_1", 0.0);
  q.set("joint_2", 0.8);
  q.set("joint_3", 1.6);
  q.set("joint_4", 0.0);
  q.set("joint_5", 0.75);
  q.set("joint_6", 0.0);
  q.set("finger_left_joint", 0.04);
  q.set("finger_right_joint", 0.04);
  return q;
}

}  // namespace duopaint
