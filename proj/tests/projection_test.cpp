#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "rangefuse/projection.hpp"
#include "rangefuse/synthetic.hpp"
#include "test_util.hpp"

using namespace rangefuse;

namespace {

Matrix34 pinhole(double f, double cx, double cy) {
  Matrix34 p = Matrix34::Zero();
  p(0, 0) = p(1, 1) = f;
  p(0, 2) = cx;
  p(1, 2) = cy;
  p(2, 2) = 1;
  return p;
}

RangeImage one_point_image(Point p) {
  return build_range_image(PointCloud({p}, std::vector<std::uint32_t>{0}), GridConfig{64, 1});
}

}  // namespace

TEST(ProjectPoint, DivideByDepth) {
  const Eigen::Vector2d uv = project_point(Matrix34::Identity(), {2, 4, 2});
  EXPECT_EQ(uv, Eigen::Vector2d(1, 2));
}

TEST(ProjectPoint, PinholeArithmetic) {
  const Eigen::Vector2d uv = project_point(pinhole(100, 50, 50), {1, 0, 10});
  EXPECT_DOUBLE_EQ(uv.x(), 60);
  EXPECT_DOUBLE_EQ(uv.y(), 50);
}

TEST(ProjectPoint, BehindCamera) {
  EXPECT_THROW(project_point(Matrix34::Identity(), {1, 1, -1}), BehindCameraError);
  EXPECT_THROW(project_point(Matrix34::Identity(), {1, 1, 0}), BehindCameraError);
  EXPECT_THROW(project_point(Matrix34::Identity(), {1, 1, 5e-7}), BehindCameraError);
  EXPECT_NO_THROW(project_point(Matrix34::Identity(), {1, 1, 2e-6}));
}

TEST(ProjectPoint, ScaleInvariance) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    Matrix34 P = Matrix34::NullaryExpr([&](Eigen::Index, Eigen::Index) { return uniform(rng, -1, 1); });
    P(2, 3) = 5.0;  // keep depth positive for the sampled X
    const Eigen::Vector3d X(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const auto a = try_project_point(P, X);
    if (!a) continue;
    const double s = std::exp(uniform(rng, -5, 5));
    const Eigen::Vector2d b = project_point(s * P, X, kDefaultMinDepth * s);
    EXPECT_LT((*a - b).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, a->cwiseAbs().maxCoeff()));
  }
}

TEST(InsideImage, ClosedPixelCenterBounds) {
  const ImageSize s{10, 5};
  EXPECT_TRUE(inside_image({0, 0}, s));
  EXPECT_TRUE(inside_image({9, 4}, s));
  EXPECT_FALSE(inside_image({9.0001, 4}, s));
  EXPECT_FALSE(inside_image({-1e-9, 0}, s));
}

TEST(BuildCorrespondences, PointAtImageCornerIncluded) {
  // Camera axes (y, z, x) of the LiDAR frame with K = I: the forward point
  // (8, 0, 0) projects exactly to pixel (0, 0).
  Matrix34 tr = Matrix34::Zero();
  tr(0, 1) = 1;
  tr(1, 2) = 1;
  tr(2, 0) = 1;
  const CalibrationSet calib(Matrix34::Identity(), Eigen::Matrix3d::Identity(), tr);
  const RangeImage img = one_point_image({8, 0, 0, 0});
  const CorrespondenceSet corr = build_correspondences(img, calib, ImageSize{20, 10});
  ASSERT_EQ(corr.size(), 1u);
  EXPECT_EQ(corr.items[0].rgb_px, Eigen::Vector2d(0, 0));
  EXPECT_EQ(corr.items[0].range_px, Eigen::Vector2d(32, 0));
  EXPECT_EQ(corr.range_size, (ImageSize{64, 1}));
}

TEST(BuildCorrespondences, BackwardCameraGivesEmptySet) {
  const LabeledScene s = generate_synthetic_scene(street_scene(), kitti_like_rig());
  Matrix34 tr = s.calib.lidar_to_camera();
  tr.leftCols<3>() = tr.leftCols<3>() * Eigen::Vector3d(-1, -1, 1).asDiagonal();  // yaw by pi
  const CalibrationSet back(s.calib.camera_intrinsics_projective(), s.calib.rectifying_rotation(), tr);
  const RangeImage img = build_range_image(s.cloud, GridConfig{});
  ASSERT_GT(img.valid_count(), 0u);
  EXPECT_TRUE(build_correspondences(img, back, s.rgb.size()).empty());
}

TEST(BuildCorrespondences, AllRaysInFrustum) {
  // A wide virtual camera sees the whole LiDAR FOV.
  VirtualRig rig = kitti_like_rig();
  rig.camera = PinholeCamera{250, 250, 499.5, 299.5, 1000, 600};
  const LabeledScene s = generate_synthetic_scene(street_scene(), rig);
  const RangeImage img = build_range_image(s.cloud, GridConfig{});
  for (std::size_t i = 0; i < s.cloud.size(); ++i) ASSERT_TRUE(s.ray_pixels[i].has_value());
  EXPECT_EQ(build_correspondences(img, s.calib, s.rgb.size()).size(), img.valid_count());
}

TEST(BuildCorrespondences, ReproducesGeneratorRayPixels) {
  const LabeledScene s = generate_synthetic_scene(street_scene(), kitti_like_rig());
  const RangeImage img = build_range_image(s.cloud, GridConfig{});
  ASSERT_EQ(img.valid_count(), s.cloud.size());  // rays sit on bin centers
  const CorrespondenceSet corr = build_correspondences(img, s.calib, s.rgb.size());
  std::size_t expected = 0;
  for (const auto& px : s.ray_pixels) expected += px.has_value();
  EXPECT_EQ(corr.size(), expected);
  for (const auto& c : corr.items) {
    const auto src = img.source_index(static_cast<int>(c.range_px.y()), static_cast<int>(c.range_px.x()));
    ASSERT_TRUE(src.has_value());
    const auto& ray_px = s.ray_pixels[*src];
    ASSERT_TRUE(ray_px.has_value());
    EXPECT_LT((c.rgb_px - *ray_px).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(BuildCorrespondences, InvariantsAndCropMonotonicity) {
  const LabeledScene s = generate_synthetic_scene(street_scene(), kitti_like_rig());
  const RangeImage img = build_range_image(s.cloud, GridConfig{});
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (int crop = 0; crop <= 600; crop += 50) {
    const ImageSize size{s.rgb.width() - crop, s.rgb.height() - crop / 3};
    const CorrespondenceSet corr = build_correspondences(img, s.calib, size);
    EXPECT_LE(corr.size(), prev);
    prev = corr.size();
    std::set<std::pair<int, int>> seen;
    for (const auto& c : corr.items) {
      ASSERT_TRUE(inside_image(c.rgb_px, size));
      ASSERT_TRUE(inside_image(c.range_px, corr.range_size));
      ASSERT_TRUE(seen.emplace(static_cast<int>(c.range_px.x()), static_cast<int>(c.range_px.y())).second);
    }
  }
  EXPECT_GT(build_correspondences(img, s.calib, s.rgb.size()).size(), 1000u);
}

TEST(CorrespondenceSet, MatrixViewsAndSubset) {
  CorrespondenceSet c{{{{1, 2}, {3, 4}}, {{5, 6}, {7, 8}}}, {10, 10}, {10, 10}};
  EXPECT_EQ(c.range_points().row(1), Eigen::RowVector2d(5, 6));
  EXPECT_EQ(c.rgb_points().row(0), Eigen::RowVector2d(3, 4));
  const auto sub = c.subset({1});
  ASSERT_EQ(sub.size(), 1u);
  EXPECT_EQ(sub.items[0].rgb_px, Eigen::Vector2d(7, 8));
  EXPECT_THROW(c.subset({2}), std::out_of_range);
}
