#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"

namespace rangefuse {

// Greedy farthest point sampling in the plane. Starts at `seed` and keeps
// adding the point with the largest distance to the selected set; ties go to
// the smallest index. Returns indices in selection order.
inline std::vector<std::size_t> farthest_point_sample(
    const Eigen::Ref<const Eigen::MatrixX2d>& points, std::size_t k, std::size_t seed = 0) {
  const auto m = static_cast<std::size_t>(points.rows());
  if (k < 1 || k > m) {
    throw ParameterError("farthest point sampling needs 1 <= k <= M (k=" + std::to_string(k) +
                         ", M=" + std::to_string(m) + ")");
  }
  if (seed >= m) {
    throw ParameterError("seed index " + std::to_string(seed) + " out of range for " +
                         std::to_string(m) + " points");
  }

  std::vector<std::size_t> selected;
  selected.reserve(k);
  // Squared distance to the nearest selected point; -1 marks selected points.
  std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
  std::size_t current = seed;
  for (;;) {
    selected.push_back(current);
    nearest[current] = -1.0;
    if (selected.size() == k) break;

    const double cx = points(static_cast<Eigen::Index>(current), 0);
    const double cy = points(static_cast<Eigen::Index>(current), 1);
    std::size_t best = m;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (nearest[i] < 0.0) continue;
      const double dx = points(static_cast<Eigen::Index>(i), 0) - cx;
      const double dy = points(static_cast<Eigen::Index>(i), 1) - cy;
      const double d = std::min(nearest[i], dx * dx + dy * dy);
      nearest[i] = d;
      if (d > best_dist) {
        best_dist = d;
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

// Bilinear blend of the four cells around (x, y) in grid coordinates
// (x = column, y = row, cell centers at integers). Outside [0, W-1] x [0, H-1]
// the result is the zero vector. `out` must hold grid.channels() values.
// Queries within this many grid units outside the closed domain are snapped
// onto the edge, absorbing round-off from warps that map border pixels to
// themselves. Anything farther out samples as zero.
inline constexpr double kEdgeTolerance = 1e-9;

inline void bilinear_sample_into(const FeatureGrid& grid, double x, double y,
                                 std::span<float> out) {
  const int w = grid.width();
  const int h = grid.height();
  auto snap = [](double v, double hi) {
    if (v < 0.0 && v >= -kEdgeTolerance) return 0.0;
    if (v > hi && v <= hi + kEdgeTolerance) return hi;
    return v;
  };
  x = snap(x, w - 1);
  y = snap(y, h - 1);
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  const auto p00 = grid.pixel(x0, y0);
  const auto p10 = grid.pixel(x1, y0);
  const auto p01 = grid.pixel(x0, y1);
  const auto p11 = grid.pixel(x1, y1);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = static_cast<float>(w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c]);
  }
}

inline std::vector<float> bilinear_sample(const FeatureGrid& grid, double x, double y) {
  std::vector<float> out(static_cast<std::size_t>(grid.channels()));
  bilinear_sample_into(grid, x, y, out);
  return out;
}

}  // namespace rangefuse
