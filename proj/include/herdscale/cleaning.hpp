#pragma once

// Background plane removal: repeated RANSAC plane fits, each followed by a
// total-least-squares refit on the winning hypothesis' inliers.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/error.hpp"
#include "herdscale/pca.hpp"
#include "herdscale/point_cloud.hpp"
#include "herdscale/rng.hpp"

namespace herdscale {

/// Plane {p : normal . p + offset = 0} with a unit normal whose
/// largest-magnitude component is positive.
struct PlaneModel {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;

  double distance(const Point3& p) const noexcept { return std::abs(normal.dot(to_vec(p)) + offset); }
};

struct RansacParams {
  /// Absolute in meters, or a fraction of the cloud's bounding-box diagonal when `relative_threshold`.
  double inlier_threshold = 0.01;
  bool relative_threshold = true;
  int max_iterations = 1000;
  double min_plane_fraction = 0.2;
  int max_planes = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(inlier_threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "inlier_threshold must be > 0");
    if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
    if (!(min_plane_fraction > 0.0 && min_plane_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "min_plane_fraction must be in (0, 1)");
    }
    if (max_planes < 1) throw Error(ErrorCode::InvalidConfig, "max_planes must be >= 1");
  }

  double threshold_for(const PointCloud& cloud) const {
    return relative_threshold ? inlier_threshold * bounding_box(cloud).diagonal() : inlier_threshold;
  }
};

struct PlaneFit {
  PlaneModel plane;
  std::vector<std::size_t> inliers;  // ascending
};

namespace detail {

inline PlaneModel plane_through(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                double min_area2, bool& ok) {
  Eigen::Vector3d n = (b - a).cross(c - a);
  const double len = n.norm();
  ok = len > min_area2;
  PlaneModel m;
  if (!ok) return m;
  n /= len;
  canonicalize_sign(n);
  m.normal = n;
  m.offset = -n.dot(a);
  return m;
}

/// Total-least-squares plane: normal is the smallest covariance eigenvector.
inline PlaneModel refit_plane(const PointCloud& cloud, const std::vector<std::size_t>& idx) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : idx) mean += to_vec(cloud[i]);
  mean /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (auto i : idx) {
    const Eigen::Vector3d d = to_vec(cloud[i]) - mean;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  canonicalize_sign(n);
  PlaneModel m;
  m.normal = n;
  m.offset = -n.dot(mean);
  return m;
}

inline std::vector<std::size_t> plane_inliers(const PointCloud& cloud, const PlaneModel& plane, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (plane.distance(cloud[i]) <= threshold) out.push_back(i);
  }
  return out;
}

inline bool all_collinear(const PointCloud& cloud) {
  if (cloud.size() < 3) return true;
  const Eigen::Vector3d c = centroid(cloud);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(covariance(cloud, c));
  const auto ev = solver.eigenvalues();
  return ev[2] <= 0.0 || !(ev[1] > 1e-12 * ev[2]);
}

inline PlaneFit fit_plane_with_threshold(const PointCloud& cloud, const RansacParams& params, double threshold,
                                         std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (n < 3) throw Error(ErrorCode::TooFewPoints, "plane fit needs at least 3 points");
  if (all_collinear(cloud)) throw Error(ErrorCode::DegenerateCloud, "all points are collinear");
  const double diag = bounding_box(cloud).diagonal();
  const double min_area2 = 1e-12 * diag * diag;

  Rng rng(seed);
  std::size_t best_count = 0;
  PlaneModel best;
  bool found = false;
  for (int it = 0; it < params.max_iterations; ++it) {
    std::size_t i = rng.below(n), j = rng.below(n), k = rng.below(n);
    if (i == j || j == k || i == k) continue;
    bool ok = false;
    const auto cand = plane_through(to_vec(cloud[i]), to_vec(cloud[j]), to_vec(cloud[k]), min_area2, ok);
    if (!ok) continue;
    std::size_t count = 0;
    for (const auto& p : cloud) count += cand.distance(p) <= threshold ? 1 : 0;
    // strict > keeps the earliest hypothesis among equal counts
    if (count > best_count) {
      best_count = count;
      best = cand;
      found = true;
    }
  }
  if (!found) {
    // every sampled triple was degenerate; fall back to the global TLS plane
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    best = refit_plane(cloud, all);
  }
  PlaneFit fit;
  const auto hypothesis_inliers = plane_inliers(cloud, best, threshold);
  fit.plane = hypothesis_inliers.size() >= 3 ? refit_plane(cloud, hypothesis_inliers) : best;
  fit.inliers = plane_inliers(cloud, fit.plane, threshold);
  if (fit.inliers.size() < hypothesis_inliers.size()) {
    // keep the refit only if it does not lose support
    fit.plane = best;
    fit.inliers = hypothesis_inliers;
  }
  return fit;
}

}  // namespace detail

/// Best plane over `max_iterations` random 3-point hypotheses, refit by TLS.
inline PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacParams& params) {
  params.validate();
  if (cloud.size() < 3) throw Error(ErrorCode::TooFewPoints, "plane fit needs at least 3 points");
  return detail::fit_plane_with_threshold(cloud, params, params.threshold_for(cloud), params.seed);
}

struct CleaningResult {
  PointCloud cloud;
  std::vector<PlaneModel> planes;
  std::vector<std::size_t> kept;  // indices into the input, ascending
};

/// Strips planes while each one holds at least `min_plane_fraction` of the
/// remaining points, up to `max_planes`. The threshold is resolved once
/// against the input cloud.
inline CleaningResult remove_planes_detailed(const PointCloud& cloud, const RansacParams& params) {
  params.validate();
  if (cloud.size() < 3) throw Error(ErrorCode::TooFewPoints, "plane removal needs at least 3 points");
  const double threshold = params.threshold_for(cloud);

  CleaningResult result;
  result.kept.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) result.kept[i] = i;
  PointCloud current = cloud;

  for (int round = 0; round < params.max_planes; ++round) {
    if (current.size() < 3 || detail::all_collinear(current)) break;
    const auto fit = detail::fit_plane_with_threshold(current, params, threshold,
                                                      derive_seed(params.seed, static_cast<std::uint64_t>(round)));
    const double fraction = static_cast<double>(fit.inliers.size()) / static_cast<double>(current.size());
    if (fraction < params.min_plane_fraction) break;
    std::vector<std::size_t> keep_local;
    std::size_t j = 0;
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (j < fit.inliers.size() && fit.inliers[j] == i) {
        ++j;
        continue;
      }
      keep_local.push_back(i);
    }
    std::vector<std::size_t> kept;
    kept.reserve(keep_local.size());
    for (auto i : keep_local) kept.push_back(result.kept[i]);
    result.kept = std::move(kept);
    current = current.subset(keep_local);
    result.planes.push_back(fit.plane);
  }
  if (current.empty()) throw Error(ErrorCode::EmptyResult, "every point belonged to a removed plane");
  result.cloud = std::move(current);
  return result;
}

inline PointCloud remove_planes(const PointCloud& cloud, const RansacParams& params) {
  return remove_planes_detailed(cloud, params).cloud;
}

}  // namespace herdscale
