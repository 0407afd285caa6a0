#pragma once

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <sstream>
#include <string>

#include "duopaint/errors.hpp"
#include "duopaint/kinematics.hpp"

namespace duopaint {

namespace detail {

inline Vec3 parse_vec3(const std::string& s, const std::string& where) {
  std::istringstream ss(s);
  Vec3 v;
  if (!(ss >> v.x() >> v.y() >> v.z()))
    raise(ErrorCode::ParseError, where + ": expected three numbers, got '" + s + "'");
  return v;
}

/// URDF rpy is fixed-axis roll-pitch-yaw: R = Rz(y) * Ry(p) * Rx(r).
inline Quat rpy_to_quat(const Vec3& rpy) {
  return Quat(Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
              Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
              Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()));
}

inline Se3Pose parse_origin(const boost::property_tree::ptree& node) {
  Vec3 xyz = Vec3::Zero(), rpy = Vec3::Zero();
  if (auto s = node.get_optional<std::string>("<xmlattr>.xyz"))
    xyz = parse_vec3(*s, "origin xyz");
  if (auto s = node.get_optional<std::string>("<xmlattr>.rpy"))
    rpy = parse_vec3(*s, "origin rpy");
  return Se3Pose(xyz, rpy_to_quat(rpy));
}

inline VisualGeometry parse_geometry(const boost::property_tree::ptree& geom,
                                     const std::string& link_name) {
  VisualGeometry g;
  if (auto box = geom.get_child_optional("box")) {
    g.kind = GeometryKind::Box;
    g.box_size = parse_vec3(box->get<std::string>("<xmlattr>.size", "0 0 0"),
                            link_name + " box size");
  } else if (auto cyl = geom.get_child_optional("cylinder")) {
    g.kind = GeometryKind::Cylinder;
    g.radius = cyl->get<double>("<xmlattr>.radius", 0.0);
    g.length = cyl->get<double>("<xmlattr>.length", 0.0);
  } else if (auto sph = geom.get_child_optional("sphere")) {
    g.kind = GeometryKind::Sphere;
    g.radius = sph->get<double>("<xmlattr>.radius", 0.0);
  } else if (auto mesh = geom.get_child_optional("mesh")) {
    g.kind = GeometryKind::Mesh;
    g.mesh_path = mesh->get<std::string>("<xmlattr>.filename", "");
    if (auto s = mesh->get_optional<std::string>("<xmlattr>.scale"))
      g.mesh_scale = parse_vec3(*s, link_name + " mesh scale");
  } else {
    raise(ErrorCode::UnsupportedElement,
          "link " + link_name + ": unsupported visual geometry");
  }
  return g;
}

}  // namespace detail

/// Parses a URDF document into a KinematicChain. Supported joint types:
/// revolute, prismatic, fixed, and continuous (treated as revolute with
/// limits +-2pi so downstream clamping stays bounded).
inline KinematicChain parse_urdf(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  std::istringstream ss(text);
  try {
    pt::read_xml(ss, doc);
  } catch (const pt::xml_parser_error& e) {
    raise(ErrorCode::ParseError, std::string("malformed XML: ") + e.what());
  }
  auto robot = doc.get_child_optional("robot");
  if (!robot) raise(ErrorCode::ParseError, "no <robot> element");

  KinematicChain chain;
  for (const auto& [key, node] : *robot) {
    if (key == "link") {
      Link link;
      link.name = node.get<std::string>("<xmlattr>.name", "");
      if (link.name.empty())
        raise(ErrorCode::ParseError, "link without a name");
      if (auto visual = node.get_child_optional("visual")) {
        if (auto origin = visual->get_child_optional("origin"))
          link.visual_origin = detail::parse_origin(*origin);
        if (auto geom = visual->get_child_optional("geometry"))
          link.visual = detail::parse_geometry(*geom, link.name);
        if (auto color = visual->get_optional<std::string>(
                "material.color.<xmlattr>.rgba")) {
          std::istringstream cs(*color);
          double r, g, b;
          if (cs >> r >> g >> b) link.visual.color = Vec3(r, g, b);
        }
      }
      chain.links.push_back(std::move(link));
    } else if (key == "joint") {
      Joint joint;
      joint.name = node.get<std::string>("<xmlattr>.name", "");
      std::string type = node.get<std::string>("<xmlattr>.type", "");
      if (type == "revolute") {
        joint.type = JointType::Revolute;
      } else if (type == "prismatic") {
        joint.type = JointType::Prismatic;
      } else if (type == "fixed") {
        joint.type = JointType::Fixed;
      } else if (type == "continuous") {
        joint.type = JointType::Revolute;
        joint.lower = -2.0 * M_PI;
        joint.upper = 2.0 * M_PI;
      } else {
        raise(ErrorCode::UnsupportedElement,
              "joint " + joint.name + " has unsupported type '" + type + "'");
      }
      joint.parent = node.get<std::string>("parent.<xmlattr>.link", "");
      joint.child = node.get<std::string>("child.<xmlattr>.link", "");
      if (joint.parent.empty() || joint.child.empty())
        raise(ErrorCode::ParseError,
              "joint " + joint.name + " lacks parent or child link");
      if (auto origin = node.get_child_optional("origin"))
        joint.origin = detail::parse_origin(*origin);
      if (auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz"))
        joint.axis = detail::parse_vec3(*axis, "joint " + joint.name + " axis");
      if (joint.type != JointType::Fixed && type != "continuous") {
        auto limit = node.get_child_optional("limit");
        if (!limit)
          raise(ErrorCode::ParseError,
                "joint " + joint.name + " lacks <limit>");
        joint.lower = limit->get<double>("<xmlattr>.lower", 0.0);
        joint.upper = limit->get<double>("<xmlattr>.upper", 0.0);
      }
      if (joint.type != JointType::Fixed) joint.axis.normalize();
      chain.joints.push_back(std::move(joint));
    }
  }
  if (chain.links.empty()) raise(ErrorCode::ParseError, "URDF has no links");
  chain.finalize();
  return chain;
}

}  // namespace duopaint
