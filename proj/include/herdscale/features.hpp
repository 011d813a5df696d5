#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include "herdscale/error.hpp"
#include "herdscale/hull.hpp"
#include "herdscale/pca.hpp"
#include "herdscale/point_cloud.hpp"

namespace herdscale {

inline constexpr std::string_view kFeatureSchemaVersion = "fv32-v1";
inline constexpr std::size_t kFeatureCount = 32;

/// Column names in feature-vector order. CSV exports use this order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    // geometry
    "length", "width", "height", "bbox_volume", "hull_volume", "surface_area",
    // shape
    "lambda1_over_lambda2", "lambda2_over_lambda3",
    // per-axis percentiles
    "x_p10", "x_p25", "x_p50", "x_p75", "x_p90",
    "y_p10", "y_p25", "y_p50", "y_p75", "y_p90",
    "z_p10", "z_p25", "z_p50", "z_p75", "z_p90",
    // vertical section densities
    "rho_z1", "rho_z2", "rho_z3",
    // moments
    "mean_x", "std_x", "mean_y", "std_y", "mean_z", "std_z"};

inline constexpr std::array<double, 5> kPercentiles = {10.0, 25.0, 50.0, 75.0, 90.0};

/// Offsets of each block inside the vector.
namespace feature_block {
inline constexpr std::size_t geometry = 0;
inline constexpr std::size_t shape = 6;
inline constexpr std::size_t percentiles = 8;
inline constexpr std::size_t density = 23;
inline constexpr std::size_t moments = 26;
}  // namespace feature_block

using FeatureVector = std::array<double, kFeatureCount>;

/// Percentile of already-sorted values with linear interpolation between
/// order statistics: rank = p/100 * (n - 1).
inline double sorted_percentile(const std::vector<double>& sorted, double p) {
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline std::array<double, 5> axis_percentiles(const PointCloud& cloud, Axis axis) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "percentiles of an empty cloud");
  std::vector<double> v;
  v.reserve(cloud.size());
  for (const auto& p : cloud) v.push_back(p[static_cast<std::size_t>(axis)]);
  std::sort(v.begin(), v.end());
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < kPercentiles.size(); ++i) out[i] = sorted_percentile(v, kPercentiles[i]);
  return out;
}

/// Fractions of points in three equal-thickness slabs of [z_min, z_max].
/// Lower boundaries inclusive; the top slab also includes z_max.
inline std::array<double, 3> z_section_densities(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "densities of an empty cloud");
  double zmin = cloud[0].z, zmax = cloud[0].z;
  for (const auto& p : cloud) {
    zmin = std::min(zmin, p.z);
    zmax = std::max(zmax, p.z);
  }
  if (zmax == zmin) return {1.0, 0.0, 0.0};
  const double range = zmax - zmin;
  const double b1 = zmin + range / 3.0;
  const double b2 = zmin + 2.0 * range / 3.0;
  std::array<std::size_t, 3> counts{};
  for (const auto& p : cloud) {
    if (p.z < b1) {
      ++counts[0];
    } else if (p.z < b2) {
      ++counts[1];
    } else {
      ++counts[2];
    }
  }
  const auto n = static_cast<double>(cloud.size());
  return {static_cast<double>(counts[0]) / n, static_cast<double>(counts[1]) / n,
          static_cast<double>(counts[2]) / n};
}

struct AxisMoments {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

/// Per-axis mean and population standard deviation.
inline AxisMoments moments(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "moments of an empty cloud");
  AxisMoments m;
  const auto n = static_cast<double>(cloud.size());
  for (std::size_t a = 0; a < 3; ++a) {
    double sum = 0.0;
    for (const auto& p : cloud) sum += p[a];
    m.mean[a] = sum / n;
    double ss = 0.0;
    for (const auto& p : cloud) {
      const double d = p[a] - m.mean[a];
      ss += d * d;
    }
    m.stddev[a] = std::sqrt(ss / n);
  }
  return m;
}

inline constexpr double kEigenRatioGuard = 1e-12;

/// Assembles the 32-value vector. Failures carry the name of the block that raised them.
inline FeatureVector extract_feature_vector(const PointCloud& cloud) {
  FeatureVector fv{};
  auto run = [](const char* block, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      e.rethrow_in(block);
    }
  };

  const auto eig = run("geometry", [&] { return pca_shape(cloud); });
  const auto ext = oriented_extents(cloud, eig);
  const auto hull = run("geometry", [&] { return convex_hull(cloud); });
  fv[0] = ext.length;
  fv[1] = ext.width;
  fv[2] = ext.height;
  fv[3] = ext.box_volume();
  fv[4] = hull.volume;
  fv[5] = hull.surface_area;

  run("shape", [&] {
    const auto& l = eig.lambda;
    if (l[1] < kEigenRatioGuard * l[0] || l[2] < kEigenRatioGuard * l[0]) {
      throw Error(ErrorCode::DegenerateCloud, "eigenvalue ratio unbounded (flat or linear cloud)");
    }
    return 0;
  });
  fv[feature_block::shape] = eig.lambda[0] / eig.lambda[1];
  fv[feature_block::shape + 1] = eig.lambda[1] / eig.lambda[2];

  for (std::size_t a = 0; a < 3; ++a) {
    const auto q = axis_percentiles(cloud, static_cast<Axis>(a));
    std::copy(q.begin(), q.end(), fv.begin() + static_cast<std::ptrdiff_t>(feature_block::percentiles + 5 * a));
  }

  const auto rho = z_section_densities(cloud);
  std::copy(rho.begin(), rho.end(), fv.begin() + static_cast<std::ptrdiff_t>(feature_block::density));

  const auto mom = moments(cloud);
  for (std::size_t a = 0; a < 3; ++a) {
    fv[feature_block::moments + 2 * a] = mom.mean[a];
    fv[feature_block::moments + 2 * a + 1] = mom.stddev[a];
  }
  return fv;
}

}  // namespace herdscale
