#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/point_cloud.hpp"
#include "herdscale/rng.hpp"

namespace testing_support {

using herdscale::Point3;
using herdscale::PointCloud;

inline PointCloud cube_corners(double sx = 1.0, double sy = 1.0, double sz = 1.0) {
  std::vector<Point3> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back({(i & 1 ? 0.5 : -0.5) * sx, (i & 2 ? 0.5 : -0.5) * sy, (i & 4 ? 0.5 : -0.5) * sz});
  }
  return PointCloud(std::move(pts));
}

inline PointCloud unit_tetrahedron() { return PointCloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}); }

inline PointCloud random_cloud(std::uint64_t seed, std::size_t n, double scale = 1.0) {
  herdscale::Rng rng(seed);
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({scale * rng.uniform(-1, 1), scale * rng.uniform(-0.6, 0.6), scale * rng.uniform(-0.3, 0.4)});
  }
  return PointCloud(std::move(pts));
}

inline PointCloud ball_cloud(std::uint64_t seed, std::size_t n) {
  herdscale::Rng rng(seed);
  std::vector<Point3> pts;
  while (pts.size() < n) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1), z = rng.uniform(-1, 1);
    if (x * x + y * y + z * z <= 1.0) pts.push_back({x, y, z});
  }
  return PointCloud(std::move(pts));
}

inline Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  herdscale::Rng rng(seed);
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline PointCloud transform(const PointCloud& c, const Eigen::Matrix3d& R, const Eigen::Vector3d& t, double s = 1.0) {
  std::vector<Point3> pts;
  for (const auto& p : c) {
    const Eigen::Vector3d q = s * (R * Eigen::Vector3d(p.x, p.y, p.z)) + t;
    pts.push_back({q.x(), q.y(), q.z()});
  }
  return PointCloud(std::move(pts));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  // per process, since ctest runs test cases concurrently
  auto dir = std::filesystem::temp_directory_path() / ("herdscale_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

}  // namespace testing_support
