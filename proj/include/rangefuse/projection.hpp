#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rangefuse/calibration.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/range_image.hpp"

namespace rangefuse {

inline constexpr double kDefaultMinDepth = 1e-6;

// (a/w, b/w) for (a, b, w) = P * (x, y, z, 1), or nullopt when w <= min_depth.
inline std::optional<Eigen::Vector2d> try_project_point(const Matrix34& P,
                                                        const Eigen::Vector3d& X,
                                                        double min_depth = kDefaultMinDepth) {
  const Eigen::Vector3d h = P.leftCols<3>() * X + P.col(3);
  if (!(h.z() > min_depth)) return std::nullopt;
  return Eigen::Vector2d(h.x() / h.z(), h.y() / h.z());
}

inline Eigen::Vector2d project_point(const Matrix34& P, const Eigen::Vector3d& X,
                                     double min_depth = kDefaultMinDepth) {
  auto uv = try_project_point(P, X, min_depth);
  if (!uv) throw BehindCameraError("point projects behind the camera (depth <= min_depth)");
  return *uv;
}

// Pixel-center convention: pixel (0, 0) is the center of the top-left pixel,
// so an image of size W x H spans [0, W-1] x [0, H-1] (closed).
inline bool inside_image(const Eigen::Vector2d& px, ImageSize size) {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= size.width - 1 &&
         px.y() <= size.height - 1;
}

struct Correspondence {
  Eigen::Vector2d range_px;  // (column, row)
  Eigen::Vector2d rgb_px;    // (u, v)
};

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  ImageSize rgb_size;
  ImageSize range_size;

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }

  Eigen::MatrixX2d range_points() const {
    Eigen::MatrixX2d m(items.size(), 2);
    for (std::size_t i = 0; i < items.size(); ++i) m.row(i) = items[i].range_px.transpose();
    return m;
  }
  Eigen::MatrixX2d rgb_points() const {
    Eigen::MatrixX2d m(items.size(), 2);
    for (std::size_t i = 0; i < items.size(); ++i) m.row(i) = items[i].rgb_px.transpose();
    return m;
  }

  CorrespondenceSet subset(const std::vector<std::size_t>& indices) const {
    CorrespondenceSet out{{}, rgb_size, range_size};
    out.items.reserve(indices.size());
    for (auto i : indices) out.items.push_back(items.at(i));
    return out;
  }
};

inline Eigen::Vector3d to_vector(const Point& p) { return {p.x, p.y, p.z}; }

// Row-major scan over valid range pixels; behind-camera and out-of-image
// projections are skipped.
inline CorrespondenceSet build_correspondences(const RangeImage& img, const CalibrationSet& calib,
                                               ImageSize rgb_size,
                                               double min_depth = kDefaultMinDepth) {
  CorrespondenceSet out{{}, rgb_size, ImageSize{img.width(), img.height()}};
  const Matrix34& P = calib.composed_projection();
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (!img.valid(r, c)) continue;
      const auto uv = try_project_point(P, to_vector(img.point(r, c)), min_depth);
      if (!uv || !inside_image(*uv, rgb_size)) continue;
      out.items.push_back({Eigen::Vector2d(c, r), *uv});
    }
  }
  return out;
}

}  // namespace rangefuse
