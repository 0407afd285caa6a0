#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <utility>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/geometry.hpp"
#include "duopaint/kdtree.hpp"
#include "duopaint/pointcloud.hpp"

namespace duopaint {

struct IcpParams {
  int max_iters = 50;
  double corr_dist = 0.03;     // correspondence rejection radius, meters
  double converge_eps = 1e-6;  // relative rmse change threshold
  bool point_to_plane = false; // requires target normals; else point-to-point
  int restarts = 6;            // rotated-init retries when the fit stays poor
  double restart_rmse = 0.004; // ungated rmse below which no restart fires
  int polish_rounds = 3;       // re-runs at a gate tied to the converged rmse
};

struct IcpResult {
  Se3Pose transform;  // maps source into target frame
  double rmse = 0.0;
  int iterations = 0;
  double inlier_fraction = 0.0;
  std::vector<double> rmse_history;  // rmse after init and after each step
};

/// Closed-form least-squares rigid fit (no scale) over the given index
/// pairs, |T*s_i - t_i|^2 minimized via SVD of the cross-covariance.
/// Reflections are excluded by the determinant correction.
inline Se3Pose fit_rigid(const std::vector<Vec3>& source,
                         const std::vector<Vec3>& target,
                         const std::vector<std::pair<int, int>>& pairs) {
  if (pairs.size() < 3)
    raise(ErrorCode::DegenerateCorrespondences,
          "need at least 3 correspondence pairs");
  Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
  for (auto [si, ti] : pairs) {
    cs += source[si];
    ct += target[ti];
  }
  cs /= double(pairs.size());
  ct /= double(pairs.size());

  Mat3 h = Mat3::Zero();
  for (auto [si, ti] : pairs)
    h += (source[si] - cs) * (target[ti] - ct).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // rank < 2 means coincident or collinear correspondences
  if (sv(0) <= 0 || sv(1) <= 1e-12 * sv(0))
    raise(ErrorCode::DegenerateCorrespondences,
          "correspondences are collinear or coincident");

  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0)
    d(2, 2) = -1.0;
  Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return Se3Pose(ct - r * cs, Quat(r));
}

namespace detail {

struct Correspondences {
  std::vector<std::pair<int, int>> pairs;  // (source idx, target idx)
  double rmse = 0.0;
};

inline Correspondences match(const std::vector<Vec3>& src_pts,
                             const KdTree3& tree, const Se3Pose& transform,
                             double corr_dist) {
  Correspondences c;
  double sum_sq = 0.0;
  for (int i = 0; i < static_cast<int>(src_pts.size()); ++i) {
    Vec3 p = transform_point(transform, src_pts[i]);
    if (auto hit = tree.nearest(p, corr_dist)) {
      c.pairs.emplace_back(i, static_cast<int>(hit->index));
      sum_sq += hit->distance * hit->distance;
    }
  }
  if (!c.pairs.empty()) c.rmse = std::sqrt(sum_sq / double(c.pairs.size()));
  return c;
}

/// Ungated mean nearest-neighbor rmse: the gated rmse is capped at
/// corr_dist, so the pre-alignment decision needs the raw figure.
inline double ungated_rmse(const std::vector<Vec3>& src_pts,
                           const KdTree3& tree, const Se3Pose& transform) {
  double sum_sq = 0.0;
  for (const auto& s : src_pts) {
    auto hit = tree.nearest(transform_point(transform, s),
                            std::numeric_limits<double>::infinity());
    sum_sq += hit->distance * hit->distance;
  }
  return std::sqrt(sum_sq / double(src_pts.size()));
}

/// Lower-quartile ungated nearest-neighbor distance: a robust estimate of
/// the matched-point noise scale that ignores the unmatched tail.
inline double lower_quartile_nn(const std::vector<Vec3>& src_pts,
                                const KdTree3& tree,
                                const Se3Pose& transform) {
  std::vector<double> d;
  d.reserve(src_pts.size());
  for (const auto& s : src_pts)
    d.push_back(tree.nearest(transform_point(transform, s),
                             std::numeric_limits<double>::infinity())
                    ->distance);
  std::size_t k = d.size() / 4;
  std::nth_element(d.begin(), d.begin() + k, d.end());
  return d[k];
}

/// Linearized point-to-plane step: minimizes sum(((s_i - t_i) . n_i)^2) over
/// a small twist [w; v], assuming source points are already near the target.
inline Se3Pose fit_point_to_plane(const std::vector<Vec3>& moved_source,
                                  const std::vector<Vec3>& target_points,
                                  const std::vector<Vec3>& target_normals,
                                  const std::vector<std::pair<int, int>>& pairs) {
  Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
  for (auto [si, ti] : pairs) {
    const Vec3& s = moved_source[si];
    const Vec3& n = target_normals[ti];
    Eigen::Matrix<double, 6, 1> a;
    a.head<3>() = s.cross(n);
    a.tail<3>() = n;
    double b = (target_points[ti] - s).dot(n);
    ata += a * a.transpose();
    atb += a * b;
  }
  Eigen::Matrix<double, 6, 1> x = ata.ldlt().solve(atb);
  Vec3 w = x.head<3>();
  double angle = w.norm();
  Quat q = angle < 1e-16 ? Quat::Identity()
                         : Quat(Eigen::AngleAxisd(angle, w / angle));
  return Se3Pose(x.tail<3>(), q);
}

/// One vanilla ICP run from a given initial transform.
inline IcpResult icp_run(const PointCloud& source, const PointCloud& target,
                         const KdTree3& tree, Se3Pose transform,
                         const IcpParams& params) {
  auto corr = match(source.points, tree, transform, params.corr_dist);
  if (corr.pairs.empty())
    raise(ErrorCode::NoCorrespondences,
          "no correspondences within corr_dist at initialization");

  IcpResult result;
  result.rmse_history.push_back(corr.rmse);
  double prev_rmse = corr.rmse;
  for (int iter = 0; iter < params.max_iters; ++iter) {
    Se3Pose step;
    try {
      std::vector<Vec3> moved(source.points.size());
      for (std::size_t i = 0; i < moved.size(); ++i)
        moved[i] = transform_point(transform, source.points[i]);
      if (params.point_to_plane && target.has_normals())
        step = fit_point_to_plane(moved, target.points, target.normals,
                                  corr.pairs);
      else
        step = fit_rigid(moved, target.points, corr.pairs);
    } catch (const Error&) {
      break;  // degenerate correspondence set; keep current estimate
    }
    Se3Pose candidate = compose(step, transform);
    auto next = match(source.points, tree, candidate, params.corr_dist);
    if (next.pairs.empty() || next.rmse > prev_rmse) break;  // keep rmse non-increasing
    transform = candidate;
    corr = std::move(next);
    result.rmse_history.push_back(corr.rmse);
    result.iterations = iter + 1;
    bool converged = std::abs(prev_rmse - corr.rmse) <
                     params.converge_eps * std::max(prev_rmse, 1e-12);
    prev_rmse = corr.rmse;
    if (converged) break;
  }

  result.transform = transform;
  result.rmse = corr.rmse;
  result.inlier_fraction = double(corr.pairs.size()) / double(source.size());
  return result;
}

/// Smallest-extent principal axis of a cloud (the sheet normal for
/// flat-ish clouds); restart rotations spin around it.
inline Vec3 minor_axis(const PointCloud& cloud) {
  Vec3 c = cloud.centroid();
  Mat3 cov = Mat3::Zero();
  for (const auto& p : cloud.points) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return eig.eigenvectors().col(0);  // ascending eigenvalues
}

}  // namespace detail

/// Point-to-point ICP. Source is the estimated mesh, target the segmented
/// depth cloud; the returned transform maps source into the target frame.
/// A translation-only centroid pre-alignment runs first when the initial
/// fit is poor (no pairs in reach, or ungated rmse above 10 cm it is always
/// kept when it strictly improves the fit). In-plane rotations beyond
/// roughly 20 degrees sit outside plain ICP's basin, so a fixed set of
/// deterministic rotated restarts runs afterwards and the candidate with
/// the lowest ungated rmse wins; restarts never fire when the first run
/// already fits tightly.
inline IcpResult icp_register(const PointCloud& source,
                              const PointCloud& target, const Se3Pose& init,
                              const IcpParams& params = {}) {
  if (source.empty() || target.empty())
    raise(ErrorCode::NoCorrespondences, "empty source or target cloud");

  KdTree3 tree(target.points);
  Se3Pose transform = init;
  auto corr = detail::match(source.points, tree, transform, params.corr_dist);

  // centroid pre-alignment candidate
  Vec3 target_centroid = target.centroid();
  {
    double rmse0 = detail::ungated_rmse(source.points, tree, transform);
    Vec3 src_centroid = Vec3::Zero();
    for (const auto& p : source.points)
      src_centroid += transform_point(transform, p);
    src_centroid /= double(source.size());
    Se3Pose pre(transform.t + (target_centroid - src_centroid), transform.q);
    auto corr_pre = detail::match(source.points, tree, pre, params.corr_dist);
    if (!corr_pre.pairs.empty() &&
        (corr.pairs.empty() ||
         detail::ungated_rmse(source.points, tree, pre) < rmse0)) {
      transform = pre;
      corr = std::move(corr_pre);
    }
  }
  if (corr.pairs.empty())
    raise(ErrorCode::NoCorrespondences,
          "no correspondences within corr_dist at initialization");

  IcpResult best = detail::icp_run(source, target, tree, transform, params);
  double best_ungated =
      detail::ungated_rmse(source.points, tree, best.transform);

  if (params.restarts > 0 && best_ungated > params.restart_rmse) {
    Vec3 axis = detail::minor_axis(target);
    for (int k = 0; k < params.restarts; ++k) {
      double angle = (k / 2 + 1) * (25.0 * M_PI / 180.0) * (k % 2 ? -1 : 1);
      Quat spin(Eigen::AngleAxisd(angle, axis));
      // rotate the aligned source about the target centroid
      Se3Pose candidate(
          target_centroid + spin * (transform.t - target_centroid),
          (spin * transform.q).normalized());
      try {
        IcpResult r = detail::icp_run(source, target, tree, candidate, params);
        double u = detail::ungated_rmse(source.points, tree, r.transform);
        if (u < best_ungated) {
          best_ungated = u;
          best = std::move(r);
        }
      } catch (const Error&) {
        continue;  // candidate init found no pairs; irrelevant
      }
      if (best_ungated <= params.restart_rmse) break;
    }
  }

  // polish: wide gates leave many-to-one matches whose pulls bias the fit
  // on subsampled or noisy targets; re-run with the gate pulled down to the
  // matched-point noise scale, keeping the result only while the ungated
  // fit does not degrade
  for (int round = 0; round < params.polish_rounds; ++round) {
    double scale =
        detail::lower_quartile_nn(source.points, tree, best.transform);
    double gate = 2.5 * scale + 1e-9;
    if (gate >= params.corr_dist) break;
    IcpParams tight = params;
    tight.corr_dist = gate;
    tight.restarts = 0;
    tight.polish_rounds = 0;
    try {
      IcpResult r =
          detail::icp_run(source, target, tree, best.transform, tight);
      double u = detail::ungated_rmse(source.points, tree, r.transform);
      if (u > best_ungated * 1.05) break;
      best_ungated = u;
      best = std::move(r);
    } catch (const Error&) {
      break;  // gate collapsed below the data scale
    }
  }
  return best;
}

}  // namespace duopaint
