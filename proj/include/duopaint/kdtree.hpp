#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "duopaint/geometry.hpp"
#include "duopaint/pointcloud.hpp"

namespace duopaint {

/// Exact nearest-neighbor index over a fixed 3D point set. Median-split
/// kd-tree; immutable after construction and shareable across threads.
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Vec3>& points) : points_(points) {
    if (points_.empty()) return;
    std::vector<std::uint32_t> order(points_.size());
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(points_.size());
    root_ = build(order, 0, points_.size());
  }

  std::size_t size() const { return points_.size(); }

  struct Hit {
    std::uint32_t index;
    double distance;
  };

  /// Nearest point within `radius` (inclusive); nullopt when none qualifies.
  /// Ties resolve to the lowest point index, matching a brute-force scan.
  std::optional<Hit> nearest(const Vec3& query, double radius) const {
    if (points_.empty()) return std::nullopt;
    double best_sq = radius * radius;
    std::int64_t best_idx = -1;
    search(root_, query, best_sq, best_idx);
    if (best_idx < 0) return std::nullopt;
    return Hit{static_cast<std::uint32_t>(best_idx), std::sqrt(best_sq)};
  }

 private:
  struct Node {
    std::uint32_t point;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis;
  };

  std::int32_t build(std::vector<std::uint32_t>& order, std::size_t lo,
                     std::size_t hi) {
    if (lo >= hi) return -1;
    // split on the widest axis of this subset
    Vec3 mn = points_[order[lo]], mx = mn;
    for (std::size_t i = lo; i < hi; ++i) {
      mn = mn.cwiseMin(points_[order[i]]);
      mx = mx.cwiseMax(points_[order[i]]);
    }
    int axis = 0;
    Vec3 ext = mx - mn;
    if (ext.y() > ext.x()) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;

    std::size_t mid = (lo + hi) / 2;
    std::nth_element(order.begin() + lo, order.begin() + mid,
                     order.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    Node node;
    node.point = order[mid];
    node.axis = static_cast<std::uint8_t>(axis);
    std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    std::int32_t l = build(order, lo, mid);
    std::int32_t r = build(order, mid + 1, hi);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(std::int32_t id, const Vec3& q, double& best_sq,
              std::int64_t& best_idx) const {
    if (id < 0) return;
    const Node& n = nodes_[id];
    const Vec3& p = points_[n.point];
    double d_sq = (p - q).squaredNorm();
    if (d_sq < best_sq ||
        (d_sq == best_sq && (best_idx < 0 || n.point < best_idx))) {
      best_sq = d_sq;
      best_idx = n.point;
    }
    double delta = q[n.axis] - p[n.axis];
    std::int32_t near = delta < 0 ? n.left : n.right;
    std::int32_t far = delta < 0 ? n.right : n.left;
    search(near, q, best_sq, best_idx);
    if (delta * delta <= best_sq) search(far, q, best_sq, best_idx);
  }

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Per-query exact nearest index within radius, or nullopt.
inline std::vector<std::optional<KdTree3::Hit>> nearest_neighbors(
    const PointCloud& cloud, const std::vector<Vec3>& queries, double radius) {
  KdTree3 tree(cloud.points);
  std::vector<std::optional<KdTree3::Hit>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(tree.nearest(q, radius));
  return out;
}

}  // namespace duopaint
