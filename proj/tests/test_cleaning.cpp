#include <gtest/gtest.h>

#include "herdscale/cleaning.hpp"
#include "herdscale/synthetic.hpp"
#include "test_support.hpp"

using namespace herdscale;
namespace ts = testing_support;

namespace {

struct Scores {
  double plane_recall = 0;
  double blob_retention = 0;
};

Scores score(const synthetic::LabelledScene& scene, const std::vector<std::size_t>& kept) {
  std::vector<bool> is_kept(scene.cloud.size(), false);
  for (auto i : kept) is_kept[i] = true;
  std::size_t planes = 0, planes_removed = 0, blob = 0, blob_kept = 0;
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    if (scene.is_plane[i]) {
      ++planes;
      planes_removed += !is_kept[i];
    } else {
      ++blob;
      blob_kept += is_kept[i];
    }
  }
  return {static_cast<double>(planes_removed) / planes, static_cast<double>(blob_kept) / blob};
}

RansacParams absolute(double threshold) {
  RansacParams p;
  p.inlier_threshold = threshold;
  p.relative_threshold = false;
  return p;
}

}  // namespace

TEST(Ransac, ExactPlaneWithOutliers) {
  Rng rng(1);
  std::vector<Point3> pts;
  for (int i = 0; i < 1000; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0});
  for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 1.0)});
  const auto fit = fit_plane_ransac(PointCloud(pts), absolute(0.01));
  EXPECT_NEAR(std::abs(fit.plane.normal.z()), 1.0, 1e-12);
  EXPECT_LE(std::abs(fit.plane.offset), 1e-9);
  ASSERT_EQ(fit.inliers.size(), 1000u);
  EXPECT_EQ(fit.inliers.back(), 999u);
}

TEST(Ransac, ThreePointsGiveTheirPlane) {
  const PointCloud c({{0, 0, 1}, {1, 0, 1}, {0, 1, 2}});
  const auto fit = fit_plane_ransac(c, absolute(1e-6));
  EXPECT_EQ(fit.inliers.size(), 3u);
  for (const auto& p : c) EXPECT_LE(fit.plane.distance(p), 1e-12);
}

TEST(Ransac, DegenerateInputs) {
  try {
    fit_plane_ransac(PointCloud({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}}), RansacParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCloud);
  }
  try {
    fit_plane_ransac(PointCloud({{0, 0, 0}, {1, 0, 0}}), RansacParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewPoints);
  }
}

TEST(Ransac, ParameterValidation) {
  RansacParams p;
  p.min_plane_fraction = 1.0;
  EXPECT_THROW(p.validate(), Error);
  p = RansacParams{};
  p.inlier_threshold = 0.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(RemovePlanes, FloorAndBlob) {
  // 60% floor, 40% blob
  const auto full = synthetic::floor_walls_blob(4, 3000, 2000);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 3000; ++i) idx.push_back(i);
  for (std::size_t i = 9000; i < 11000; ++i) idx.push_back(i);
  synthetic::LabelledScene scene{full.cloud.subset(idx), {}};
  for (auto i : idx) scene.is_plane.push_back(full.is_plane[i]);

  const auto r = remove_planes_detailed(scene.cloud, RansacParams{});
  EXPECT_EQ(r.planes.size(), 1u);
  const auto s = score(scene, r.kept);
  EXPECT_GE(s.plane_recall, 0.99);
  EXPECT_GE(s.blob_retention, 0.99);
}

TEST(RemovePlanes, FloorTwoWallsAndBlob) {
  const auto scene = synthetic::floor_walls_blob(11);
  const auto r = remove_planes_detailed(scene.cloud, RansacParams{});
  EXPECT_EQ(r.planes.size(), 3u);
  const auto s = score(scene, r.kept);
  EXPECT_GE(s.plane_recall, 0.99);
  EXPECT_GE(s.blob_retention, 0.99);
  for (std::size_t i = 0; i < r.kept.size(); ++i) EXPECT_EQ(r.cloud[i], scene.cloud[r.kept[i]]);
}

TEST(RemovePlanes, NoPlanarComponentIsNoOp) {
  const auto blob = ts::ball_cloud(3, 2000);
  const auto r = remove_planes_detailed(blob, RansacParams{});
  EXPECT_TRUE(r.planes.empty());
  EXPECT_EQ(r.cloud, blob);
}

TEST(RemovePlanes, IdempotentAndDeterministic) {
  const auto scene = synthetic::floor_walls_blob(21);
  RansacParams p;
  p.seed = 77;
  const auto once = remove_planes(scene.cloud, p);
  EXPECT_EQ(remove_planes(once, p), once);
  EXPECT_EQ(remove_planes(scene.cloud, p), once);
}

TEST(RemovePlanes, AllPlanarIsEmptyResult) {
  Rng rng(2);
  std::vector<Point3> pts;
  for (int i = 0; i < 500; ++i) pts.push_back({rng.uniform(0, 1), rng.uniform(0, 1), 0.0});
  try {
    remove_planes(PointCloud(pts), RansacParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyResult);
  }
}
