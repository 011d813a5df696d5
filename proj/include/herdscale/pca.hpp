#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "herdscale/error.hpp"
#include "herdscale/point_cloud.hpp"

namespace herdscale {

/// Covariance eigen-structure of a cloud. Eigenvalues descend; each axis is
/// unit length with its largest-magnitude component positive.
struct ShapeEigen {
  std::array<double, 3> lambda{};
  std::array<Eigen::Vector3d, 3> axes;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
};

inline Eigen::Vector3d to_vec(const Point3& p) { return {p.x, p.y, p.z}; }

inline Eigen::Vector3d centroid(const PointCloud& cloud) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : cloud) c += to_vec(p);
  return c / static_cast<double>(cloud.size());
}

/// Population covariance (divisor N), two-pass.
inline Eigen::Matrix3d covariance(const PointCloud& cloud, const Eigen::Vector3d& mean) {
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : cloud) {
    const Eigen::Vector3d d = to_vec(p) - mean;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(cloud.size());
}

inline void canonicalize_sign(Eigen::Vector3d& axis) {
  Eigen::Index k = 0;
  axis.cwiseAbs().maxCoeff(&k);
  if (axis[k] < 0) axis = -axis;
}

inline ShapeEigen pca_shape(const PointCloud& cloud) {
  if (cloud.size() < 4) throw Error(ErrorCode::TooFewPoints, "PCA needs at least 4 points, got " + std::to_string(cloud.size()));
  ShapeEigen out;
  out.centroid = centroid(cloud);
  const Eigen::Matrix3d cov = covariance(cloud, out.centroid);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen returns ascending eigenvalues
  for (int i = 0; i < 3; ++i) {
    out.lambda[static_cast<std::size_t>(i)] = std::max(0.0, solver.eigenvalues()[2 - i]);
    Eigen::Vector3d axis = solver.eigenvectors().col(2 - i).normalized();
    canonicalize_sign(axis);
    out.axes[static_cast<std::size_t>(i)] = axis;
  }
  if (!(out.lambda[0] > 0.0)) throw Error(ErrorCode::DegenerateCloud, "all points coincide (lambda1 = 0)");
  return out;
}

struct Extents {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;

  double box_volume() const noexcept { return length * width * height; }
};

/// Extents along the principal axes, sorted so length >= width >= height.
inline Extents oriented_extents(const PointCloud& cloud, const ShapeEigen& eig) {
  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : cloud) {
    const Eigen::Vector3d d = to_vec(p) - eig.centroid;
    for (std::size_t a = 0; a < 3; ++a) {
      const double t = eig.axes[a].dot(d);
      lo[a] = std::min(lo[a], t);
      hi[a] = std::max(hi[a], t);
    }
  }
  std::array<double, 3> ext{hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
  std::sort(ext.begin(), ext.end(), std::greater<>());
  return {ext[0], ext[1], ext[2]};
}

}  // namespace herdscale
