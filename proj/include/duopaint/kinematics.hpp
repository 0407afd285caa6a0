#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"

namespace duopaint {

enum class JointType { Revolute, Prismatic, Fixed };

enum class GeometryKind { None, Box, Cylinder, Sphere, Mesh };

struct VisualGeometry {
  GeometryKind kind = GeometryKind::None;
  Vec3 box_size = Vec3::Zero();      // full extents
  double radius = 0.0;               // cylinder / sphere
  double length = 0.0;               // cylinder
  std::string mesh_path;             // external mesh, relative to the URDF
  Vec3 mesh_scale = Vec3::Ones();
  Vec3 color = Vec3(0.7, 0.7, 0.7);  // from <material>, linear [0,1]
};

struct Link {
  std::string name;
  VisualGeometry visual;
  Se3Pose visual_origin;
};

struct Joint {
  std::string name;
  JointType type = JointType::Fixed;
  std::string parent;
  std::string child;
  Se3Pose origin;
  Vec3 axis = Vec3::UnitZ();
  double lower = 0.0;  // radians or meters
  double upper = 0.0;
};

/// Joint name -> scalar value (radians for revolute, meters for prismatic).
struct JointConfig {
  std::map<std::string, double> values;

  double at(const std::string& joint) const {
    auto it = values.find(joint);
    if (it == values.end())
      raise(ErrorCode::MissingJointValue, "no value for joint " + joint);
    return it->second;
  }
  bool has(const std::string& joint) const { return values.count(joint) > 0; }
  void set(const std::string& joint, double v) { values[joint] = v; }
};

/// Parsed robot model: a joint tree rooted at root_link. Immutable after
/// construction; FK/IK below are pure functions over it.
struct KinematicChain {
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::string root_link;
  std::string ee_link;

  // derived
  std::unordered_map<std::string, int> link_index;
  std::vector<int> joint_order;             // traversal order, parents first
  std::vector<std::string> actuated_joints; // non-fixed, in URDF order

  const Link& link(const std::string& name) const {
    auto it = link_index.find(name);
    if (it == link_index.end())
      raise(ErrorCode::ParseError, "unknown link " + name);
    return links[it->second];
  }

  const Joint* find_joint(const std::string& name) const {
    for (const auto& j : joints)
      if (j.name == name) return &j;
    return nullptr;
  }

  /// Validates the tree property and derives traversal order. Raises
  /// ParseError for dangling link references, CycleError when the joint
  /// graph is not a tree rooted at a single link.
  void finalize() {
    link_index.clear();
    for (int i = 0; i < static_cast<int>(links.size()); ++i) {
      if (link_index.count(links[i].name))
        raise(ErrorCode::ParseError, "duplicate link " + links[i].name);
      link_index[links[i].name] = i;
    }
    std::unordered_map<std::string, int> parent_joint_of;
    for (int j = 0; j < static_cast<int>(joints.size()); ++j) {
      const Joint& joint = joints[j];
      if (!link_index.count(joint.parent))
        raise(ErrorCode::ParseError,
              "joint " + joint.name + " references missing parent link " + joint.parent);
      if (!link_index.count(joint.child))
        raise(ErrorCode::ParseError,
              "joint " + joint.name + " references missing child link " + joint.child);
      if (parent_joint_of.count(joint.child))
        raise(ErrorCode::CycleError,
              "link " + joint.child + " has more than one parent joint");
      parent_joint_of[joint.child] = j;
      if (joint.type != JointType::Fixed) {
        double n = joint.axis.norm();
        if (n < 1e-12)
          raise(ErrorCode::ParseError, "joint " + joint.name + " has zero axis");
        if (joint.lower > joint.upper)
          raise(ErrorCode::ParseError, "joint " + joint.name + " has lower > upper");
      }
    }

    // the root is the unique link without a parent joint
    std::vector<std::string> roots;
    for (const auto& l : links)
      if (!parent_joint_of.count(l.name)) roots.push_back(l.name);
    if (roots.size() != 1)
      raise(ErrorCode::CycleError,
            roots.empty() ? "joint graph has no root (cycle)"
                          : "joint graph has multiple roots");
    root_link = roots[0];

    // breadth-first from the root; anything unreached sits on a cycle
    joint_order.clear();
    std::vector<std::string> frontier{root_link};
    std::unordered_map<std::string, int> depth{{root_link, 0}};
    while (!frontier.empty()) {
      std::vector<std::string> next;
      for (const auto& ln : frontier) {
        for (int j = 0; j < static_cast<int>(joints.size()); ++j) {
          if (joints[j].parent != ln) continue;
          joint_order.push_back(j);
          depth[joints[j].child] = depth[ln] + 1;
          next.push_back(joints[j].child);
        }
      }
      frontier = std::move(next);
    }
    if (joint_order.size() != joints.size())
      raise(ErrorCode::CycleError, "joint graph contains a cycle");

    actuated_joints.clear();
    for (const auto& j : joints)
      if (j.type != JointType::Fixed) actuated_joints.push_back(j.name);

    // default end effector: deepest leaf (first such in link order)
    if (ee_link.empty()) {
      int best_depth = -1;
      for (const auto& l : links) {
        bool leaf = true;
        for (const auto& j : joints)
          if (j.parent == l.name) leaf = false;
        if (leaf && depth[l.name] > best_depth) {
          best_depth = depth[l.name];
          ee_link = l.name;
        }
      }
    }
  }

  void clamp_to_limits(JointConfig& q) const {
    for (const auto& j : joints) {
      if (j.type == JointType::Fixed) continue;
      auto it = q.values.find(j.name);
      if (it != q.values.end())
        it->second = std::clamp(it->second, j.lower, j.upper);
    }
  }

  bool within_limits(const JointConfig& q) const {
    for (const auto& j : joints) {
      if (j.type == JointType::Fixed) continue;
      if (!q.has(j.name)) return false;
      double v = q.at(j.name);
      if (v < j.lower - 1e-12 || v > j.upper + 1e-12) return false;
    }
    return true;
  }
};

inline Se3Pose joint_motion(const Joint& joint, double value) {
  switch (joint.type) {
    case JointType::Revolute:
      return Se3Pose(Vec3::Zero(),
                     Quat(Eigen::AngleAxisd(value, joint.axis.normalized())));
    case JointType::Prismatic:
      return Se3Pose(value * joint.axis.normalized(), Quat::Identity());
    case JointType::Fixed:
      return Se3Pose::identity();
  }
  return Se3Pose::identity();
}

/// Pose of every link; `base` is the world pose of the root link.
inline std::map<std::string, Se3Pose> forward_kinematics(
    const KinematicChain& chain, const JointConfig& q,
    const Se3Pose& base = Se3Pose::identity()) {
  std::map<std::string, Se3Pose> poses;
  poses[chain.root_link] = base;
  for (int jidx : chain.joint_order) {
    const Joint& joint = chain.joints[jidx];
    double value = joint.type == JointType::Fixed ? 0.0 : q.at(joint.name);
    poses[joint.child] =
        compose(poses.at(joint.parent),
                compose(joint.origin, joint_motion(joint, value)));
  }
  return poses;
}

inline Se3Pose fk_link(const KinematicChain& chain, const JointConfig& q,
                       const std::string& link,
                       const Se3Pose& base = Se3Pose::identity()) {
  auto poses = forward_kinematics(chain, q, base);
  auto it = poses.find(link);
  if (it == poses.end()) raise(ErrorCode::ParseError, "unknown link " + link);
  return it->second;
}

inline Se3Pose fk_ee(const KinematicChain& chain, const JointConfig& q,
                     const Se3Pose& base = Se3Pose::identity()) {
  return fk_link(chain, q, chain.ee_link, base);
}

/// Geometric Jacobian of the end-effector twist [v; w] (world frame) w.r.t.
/// the actuated joints, columns in chain.actuated_joints order.
inline Eigen::MatrixXd jacobian(const KinematicChain& chain,
                                const JointConfig& q,
                                const Se3Pose& base = Se3Pose::identity()) {
  auto poses = forward_kinematics(chain, q, base);
  Vec3 p_ee = poses.at(chain.ee_link).t;

  // joints on the root -> ee path contribute; others have zero columns
  std::unordered_map<std::string, const Joint*> parent_joint;
  for (const auto& j : chain.joints) parent_joint[j.child] = &j;
  std::unordered_map<std::string, bool> on_path;
  for (std::string ln = chain.ee_link; parent_joint.count(ln);) {
    const Joint* j = parent_joint[ln];
    on_path[j->name] = true;
    ln = j->parent;
  }

  Eigen::MatrixXd jac(6, chain.actuated_joints.size());
  jac.setZero();
  for (int c = 0; c < static_cast<int>(chain.actuated_joints.size()); ++c) {
    const Joint* joint = chain.find_joint(chain.actuated_joints[c]);
    if (!on_path.count(joint->name)) continue;
    Se3Pose joint_frame = compose(poses.at(joint->parent), joint->origin);
    Vec3 axis_w = joint_frame.q * joint->axis.normalized();
    if (joint->type == JointType::Revolute) {
      jac.block<3, 1>(0, c) = axis_w.cross(p_ee - joint_frame.t);
      jac.block<3, 1>(3, c) = axis_w;
    } else {
      jac.block<3, 1>(0, c) = axis_w;
    }
  }
  return jac;
}

struct IkParams {
  double damping = 0.05;
  int max_iters = 200;
  double pos_tol = 1e-4;  // meters
  double rot_tol = 1e-3;  // radians
};

struct IkResult {
  JointConfig joints;
  bool converged = false;
  int iterations = 0;
  double pos_error = 0.0;   // meters, at returned joints
  double rot_error = 0.0;   // radians, at returned joints
  double best_error = 0.0;  // combined norm, monotone over the run
  std::vector<double> error_history;  // accepted error per iteration
};

/// 6D pose error [position; rotation vector], world frame.
inline Eigen::Matrix<double, 6, 1> pose_error(const Se3Pose& current,
                                              const Se3Pose& target) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.t - current.t;
  Quat dq = target.q * current.q.conjugate();
  Eigen::AngleAxisd aa(dq);
  double angle = aa.angle();
  if (angle > M_PI) angle -= 2.0 * M_PI;  // shortest arc
  e.tail<3>() = angle * aa.axis();
  return e;
}

/// Damped-least-squares IK with per-step joint-limit clamping and step
/// halving so the accepted error never increases. Non-convergence is a
/// result, not an exception: callers decide whether to drop the frame.
inline IkResult solve_ik(const KinematicChain& chain, const Se3Pose& target,
                         const JointConfig& seed, const IkParams& params = {},
                         const Se3Pose& base = Se3Pose::identity()) {
  const auto& names = chain.actuated_joints;
  JointConfig q = seed;
  chain.clamp_to_limits(q);

  auto eval = [&](const JointConfig& cfg) {
    return pose_error(fk_ee(chain, cfg, base), target);
  };

  IkResult result;
  Eigen::Matrix<double, 6, 1> err = eval(q);
  result.best_error = err.norm();
  result.error_history.push_back(err.norm());

  auto within_tol = [&](const Eigen::Matrix<double, 6, 1>& e) {
    return e.head<3>().norm() <= params.pos_tol &&
           e.tail<3>().norm() <= params.rot_tol;
  };

  const double lambda_sq = params.damping * params.damping;
  for (int iter = 0; iter < params.max_iters && !within_tol(err); ++iter) {
    Eigen::MatrixXd jac = jacobian(chain, q, base);
    Eigen::Matrix<double, 6, 6> jjt =
        jac * jac.transpose() +
        lambda_sq * Eigen::Matrix<double, 6, 6>::Identity();
    Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(err);

    bool improved = false;
    double scale = 1.0;
    for (int attempt = 0; attempt < 8; ++attempt, scale *= 0.5) {
      JointConfig q_try = q;
      for (int c = 0; c < static_cast<int>(names.size()); ++c)
        q_try.values[names[c]] = q.at(names[c]) + scale * dq(c);
      chain.clamp_to_limits(q_try);
      Eigen::Matrix<double, 6, 1> e_try = eval(q_try);
      if (e_try.norm() < err.norm()) {
        q = std::move(q_try);
        err = e_try;
        improved = true;
        break;
      }
    }
    result.iterations = iter + 1;
    result.best_error = std::min(result.best_error, err.norm());
    result.error_history.push_back(err.norm());
    if (!improved) break;  // stuck: local minimum or unreachable target
  }

  result.joints = q;
  result.pos_error = err.head<3>().norm();
  result.rot_error = err.tail<3>().norm();
  result.converged = within_tol(err);
  return result;
}

/// Linear width -> joint map for a parallel-jaw gripper. Declared in robot
/// config rather than inferred: URDFs encode finger kinematics
/// inconsistently.
struct GripperWidthMap {
  double max_width = 0.08;  // meters
  struct Finger {
    std::string joint;
    double closed = 0.0;
    double open = 0.04;
  };
  std::vector<Finger> fingers;
};

inline JointConfig gripper_width_to_joints(const KinematicChain& chain,
                                           const GripperWidthMap& map,
                                           double width) {
  double w = std::clamp(width, 0.0, map.max_width);
  double s = map.max_width > 0 ? w / map.max_width : 0.0;
  JointConfig q;
  for (const auto& f : map.fingers) {
    double v = f.closed + s * (f.open - f.closed);
    if (const Joint* j = chain.find_joint(f.joint);
        j && j->type != JointType::Fixed)
      v = std::clamp(v, j->lower, j->upper);
    q.set(f.joint, v);
  }
  return q;
}

}  // namespace duopaint
