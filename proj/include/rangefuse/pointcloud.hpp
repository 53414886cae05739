#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rangefuse/error.hpp"

namespace rangefuse {

// A single LiDAR return in sensor coordinates (meters), intensity in [0, 1].
struct Point {
  float x{};
  float y{};
  float z{};
  float intensity{};
};

// Unordered LiDAR returns with optional per-point beam ids. Beam ids are
// either present for every point or absent for all of them.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Point> points,
                      std::optional<std::vector<std::uint32_t>> beam_ids = std::nullopt)
      : points_(std::move(points)), beam_ids_(std::move(beam_ids)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const Point& p = points_[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
          !std::isfinite(p.intensity)) {
        throw ParameterError("point " + std::to_string(i) + " has a non-finite value");
      }
    }
    if (beam_ids_ && beam_ids_->size() != points_.size()) {
      throw ParameterError("beam id count " + std::to_string(beam_ids_->size()) +
                           " does not match point count " + std::to_string(points_.size()));
    }
  }

  const std::vector<Point>& points() const noexcept { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  bool has_beam_ids() const noexcept { return beam_ids_.has_value(); }
  // Precondition: has_beam_ids().
  const std::vector<std::uint32_t>& beam_ids() const { return *beam_ids_; }

 private:
  std::vector<Point> points_;
  std::optional<std::vector<std::uint32_t>> beam_ids_;
};

}  // namespace rangefuse
