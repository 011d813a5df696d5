#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "herdscale/error.hpp"

namespace herdscale {

/// A point in meters; z is vertical.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t axis) const noexcept { return axis == 0 ? x : (axis == 1 ? y : z); }
  bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  friend bool operator==(const Point3&, const Point3&) = default;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

/// Ordered list of finite points. Vertex order is preserved everywhere.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].finite()) {
        throw Error(ErrorCode::NonFiniteCoordinate, "point " + std::to_string(i), std::to_string(i));
      }
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const Point3& operator[](std::size_t i) const noexcept { return points_[i]; }
  std::span<const Point3> points() const noexcept { return points_; }

  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  /// Points at the given (ascending) indices, original order kept.
  PointCloud subset(std::span<const std::size_t> indices) const {
    PointCloud out;
    out.points_.reserve(indices.size());
    for (auto i : indices) out.points_.push_back(points_[i]);
    return out;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point3> points_;
};

struct BoundingBox {
  Point3 min;
  Point3 max;

  double diagonal() const noexcept {
    return std::sqrt((max.x - min.x) * (max.x - min.x) + (max.y - min.y) * (max.y - min.y) +
                     (max.z - min.z) * (max.z - min.z));
  }
};

inline BoundingBox bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "bounding box of an empty cloud");
  BoundingBox box{cloud[0], cloud[0]};
  for (const auto& p : cloud) {
    box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
    box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
  }
  return box;
}

}  // namespace herdscale
