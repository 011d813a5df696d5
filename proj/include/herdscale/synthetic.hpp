#pragma once

// Seeded generators for labelled test scenes and synthetic herds.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "herdscale/features.hpp"
#include "herdscale/hull.hpp"
#include "herdscale/point_cloud.hpp"
#include "herdscale/rng.hpp"

namespace herdscale::synthetic {

inline constexpr double kPi = 3.14159265358979323846;

struct Ellipsoid {
  double a = 1.0, b = 0.4, c = 0.45;  // semi-axes along x, y, z before rotation
  double yaw = 0.0;                   // rotation about z, radians
  Point3 center{0.0, 0.0, 0.0};
};

/// Points on the ellipsoid surface: uniform directions on the unit sphere
/// mapped through the axis scaling, then rotated and translated.
inline std::vector<Point3> ellipsoid_surface(const Ellipsoid& e, std::size_t count, Rng& rng) {
  std::vector<Point3> pts;
  pts.reserve(count);
  const double cy = std::cos(e.yaw), sy = std::sin(e.yaw);
  for (std::size_t i = 0; i < count; ++i) {
    double x, y, z, r2;
    do {
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
      r2 = x * x + y * y + z * z;
    } while (r2 < 1e-24);
    const double r = std::sqrt(r2);
    const double px = e.a * x / r, py = e.b * y / r, pz = e.c * z / r;
    pts.push_back({e.center.x + cy * px - sy * py, e.center.y + sy * px + cy * py, e.center.z + pz});
  }
  return pts;
}

struct LabelledScene {
  PointCloud cloud;
  std::vector<bool> is_plane;  // generator label per point
};

/// Floor (z = 0) and two walls (x = -half, y = +half) with small normal
/// jitter, plus an ellipsoid blob standing clear of all three.
inline LabelledScene floor_walls_blob(std::uint64_t seed, std::size_t plane_points = 3000, std::size_t blob_points = 2000,
                                      double half = 2.0, double jitter = 0.002) {
  Rng rng(seed);
  std::vector<Point3> pts;
  std::vector<bool> label;
  for (std::size_t i = 0; i < plane_points; ++i) {
    pts.push_back({rng.uniform(-half, half), rng.uniform(-half, half), jitter * rng.normal()});
    label.push_back(true);
  }
  for (std::size_t i = 0; i < plane_points; ++i) {
    pts.push_back({-half + jitter * rng.normal(), rng.uniform(-half, half), rng.uniform(0.0, 2.0)});
    label.push_back(true);
  }
  for (std::size_t i = 0; i < plane_points; ++i) {
    pts.push_back({rng.uniform(-half, half), half + jitter * rng.normal(), rng.uniform(0.0, 2.0)});
    label.push_back(true);
  }
  Ellipsoid blob{0.8, 0.35, 0.4, 0.3, {0.2, -0.3, 0.9}};
  for (const auto& p : ellipsoid_surface(blob, blob_points, rng)) {
    pts.push_back(p);
    label.push_back(false);
  }
  return {PointCloud(std::move(pts)), std::move(label)};
}

struct Animal {
  std::string id;
  PointCloud cloud;
  double weight_kg = 0.0;
  double hull_volume = 0.0;
};

struct HerdOptions {
  std::size_t animals = 100;
  std::size_t points = 2000;
  double noise = 0.02;  // weight = 1000 * V_hull * (1 + eta), eta ~ U(-noise, noise)
  double a_lo = 0.8, a_hi = 1.2;
  double b_lo = 0.3, b_hi = 0.45;
  double c_lo = 0.35, c_hi = 0.5;
};

/// Ellipsoid "animals" with random semi-axes, heading and position. The
/// weight follows the convex hull volume of the sampled points.
inline std::vector<Animal> ellipsoid_herd(std::uint64_t seed, const HerdOptions& opt = {}) {
  std::vector<Animal> herd;
  for (std::size_t i = 0; i < opt.animals; ++i) {
    Rng rng(derive_seed(seed, i));
    Ellipsoid e;
    e.a = rng.uniform(opt.a_lo, opt.a_hi);
    e.b = rng.uniform(opt.b_lo, opt.b_hi);
    e.c = rng.uniform(opt.c_lo, opt.c_hi);
    e.yaw = rng.uniform(0.0, 2.0 * kPi);
    e.center = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), e.c};
    const double eta = rng.uniform(-opt.noise, opt.noise);
    PointCloud cloud(ellipsoid_surface(e, opt.points, rng));
    const double vol = convex_hull(cloud).volume;
    char id[16];
    std::snprintf(id, sizeof(id), "animal%03zu", i);
    herd.push_back({id, std::move(cloud), 1000.0 * vol * (1.0 + eta), vol});
  }
  return herd;
}

}  // namespace herdscale::synthetic
