#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rangefuse/calibration.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/pointcloud.hpp"
#include "rangefuse/range_image.hpp"

namespace rangefuse {

// Class-id grid over an image domain. kNoClass marks pixels without a label.
struct LabelGrid {
  static constexpr std::int32_t kNoClass = -1;

  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;

  LabelGrid() = default;
  LabelGrid(int w, int h, std::int32_t fill = kNoClass)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  ImageSize size() const { return {width, height}; }
};

struct Box {
  Eigen::Vector3d min_corner;
  Eigen::Vector3d max_corner;
  int class_id = 0;
};

// Vertical cylinder with its axis through (center_x, center_y).
struct Cylinder {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  int class_id = 0;
};

struct SceneDescription {
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  int num_classes = 4;
  int background_class = 0;
};

struct PinholeCamera {
  double fx = 721.5377;
  double fy = 721.5377;
  double cx = 609.5593;
  double cy = 172.854;
  int width = 1242;
  int height = 375;

  Matrix34 projective() const {
    Matrix34 k = Matrix34::Zero();
    k(0, 0) = fx;
    k(1, 1) = fy;
    k(0, 2) = cx;
    k(1, 2) = cy;
    k(2, 2) = 1.0;
    return k;
  }
  ImageSize size() const { return {width, height}; }
};

enum class RayLayout {
  // One ray per (beam elevation, azimuth step), azimuths at bin centers.
  lidar_grid,
  // One ray per camera pixel center, cast from the camera center; beam id is
  // the pixel row. Requires a zero LiDAR-to-camera translation.
  camera_pixels,
};

struct VirtualRig {
  std::vector<double> beam_elevations;  // radians, beam id = index
  int azimuth_steps = 512;
  double azimuth_min = -std::numbers::pi / 4;
  double azimuth_max = std::numbers::pi / 4;
  PinholeCamera camera;
  Matrix34 lidar_to_camera = Matrix34::Identity();
  RayLayout layout = RayLayout::lidar_grid;
};

struct LabeledScene {
  PointCloud cloud;
  std::vector<std::uint32_t> per_point_class;
  FeatureGrid rgb;           // stride-1, 3 channels in [0, 1]
  LabelGrid rgb_labels;      // perfect per-pixel class mask of `rgb`
  CalibrationSet calib;
  // RGB pixel of each stored point computed directly from the camera model
  // (not through the composed matrix); nullopt outside the frustum or image.
  std::vector<std::optional<Eigen::Vector2d>> ray_pixels;
};

// Flat per-class colors; class ids beyond the palette wrap around.
inline std::array<float, 3> class_color(int class_id) {
  static constexpr std::array<std::array<float, 3>, 8> kPalette{{
      {0.0f, 0.0f, 0.0f},
      {0.9f, 0.1f, 0.1f},
      {0.1f, 0.8f, 0.2f},
      {0.2f, 0.3f, 0.9f},
      {0.9f, 0.8f, 0.1f},
      {0.7f, 0.2f, 0.8f},
      {0.1f, 0.8f, 0.8f},
      {0.6f, 0.6f, 0.6f},
  }};
  const auto n = static_cast<int>(kPalette.size());
  return kPalette[static_cast<std::size_t>(((class_id % n) + n) % n)];
}

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  int class_id = -1;
  explicit operator bool() const { return class_id >= 0; }
};

namespace detail {

inline double intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Box& b) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.min_corner[a] || o[a] > b.max_corner[a]) return -1.0;
      continue;
    }
    double ta = (b.min_corner[a] - o[a]) / d[a];
    double tb = (b.max_corner[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0;
  }
  return t0 > 0.0 ? t0 : (t1 > 0.0 ? t1 : -1.0);
}

inline double intersect_cylinder(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                 const Cylinder& c) {
  double best = std::numeric_limits<double>::infinity();
  const double ox = o.x() - c.center_x;
  const double oy = o.y() - c.center_y;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 0.0) {
    const double b = 2.0 * (ox * d.x() + oy * d.y());
    const double cc = ox * ox + oy * oy - c.radius * c.radius;
    const double disc = b * b - 4.0 * a * cc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        const double z = o.z() + t * d.z();
        if (t > 0.0 && z >= c.z_min && z <= c.z_max) best = std::min(best, t);
      }
    }
  }
  if (d.z() != 0.0) {
    for (double zc : {c.z_min, c.z_max}) {
      const double t = (zc - o.z()) / d.z();
      const double x = ox + t * d.x();
      const double y = oy + t * d.y();
      if (t > 0.0 && x * x + y * y <= c.radius * c.radius) best = std::min(best, t);
    }
  }
  return std::isfinite(best) ? best : -1.0;
}

}  // namespace detail

// Nearest hit along o + t*d, t > 0.
inline RayHit cast_ray(const SceneDescription& scene, const Eigen::Vector3d& origin,
                       const Eigen::Vector3d& dir) {
  RayHit hit;
  for (const Box& b : scene.boxes) {
    const double t = detail::intersect_box(origin, dir, b);
    if (t > 0.0 && t < hit.t) hit = {t, b.class_id};
  }
  for (const Cylinder& c : scene.cylinders) {
    const double t = detail::intersect_cylinder(origin, dir, c);
    if (t > 0.0 && t < hit.t) hit = {t, c.class_id};
  }
  return hit;
}

// Deterministic reflectance per class.
inline float synthetic_intensity(int class_id) {
  return 0.2f + 0.2f * static_cast<float>(((class_id % 4) + 4) % 4);
}

// Ray-casts a LiDAR sweep and renders the camera image of the same scene.
// The calibration is exact by construction: P = K * [R|t].
inline LabeledScene generate_synthetic_scene(const SceneDescription& scene, const VirtualRig& rig) {
  const PinholeCamera& cam = rig.camera;
  if (cam.width < 1 || cam.height < 1) throw ParameterError("camera image must be non-empty");
  const Eigen::Matrix3d R = rig.lidar_to_camera.leftCols<3>();
  const Eigen::Vector3d t = rig.lidar_to_camera.col(3);
  const Eigen::Vector3d cam_center = -R.transpose() * t;

  LabeledScene out;
  out.calib = CalibrationSet(cam.projective(), Eigen::Matrix3d::Identity(), rig.lidar_to_camera);

  auto pixel_ray = [&](double u, double v) -> Eigen::Vector3d {
    const Eigen::Vector3d dc((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    return (R.transpose() * dc).normalized();
  };
  auto camera_pixel = [&](const Eigen::Vector3d& X) -> std::optional<Eigen::Vector2d> {
    const Eigen::Vector3d xc = R * X + t;
    if (!(xc.z() > 0.0)) return std::nullopt;
    const Eigen::Vector2d px(cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy);
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() > cam.width - 1 || px.y() > cam.height - 1) {
      return std::nullopt;
    }
    return px;
  };

  std::vector<Point> points;
  std::vector<std::uint32_t> beams;
  auto emit = [&](const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, std::uint32_t beam) {
    const RayHit hit = cast_ray(scene, origin, dir);
    if (!hit) return;
    const Eigen::Vector3d X = origin + hit.t * dir;
    const Point p{static_cast<float>(X.x()), static_cast<float>(X.y()), static_cast<float>(X.z()),
                  synthetic_intensity(hit.class_id)};
    points.push_back(p);
    beams.push_back(beam);
    out.per_point_class.push_back(static_cast<std::uint32_t>(hit.class_id));
    out.ray_pixels.push_back(camera_pixel(Eigen::Vector3d(p.x, p.y, p.z)));
  };

  if (rig.layout == RayLayout::lidar_grid) {
    if (rig.beam_elevations.empty() || rig.azimuth_steps < 1) {
      throw ParameterError("virtual rig needs at least one beam and one azimuth step");
    }
    if (!(rig.azimuth_max > rig.azimuth_min)) {
      throw ParameterError("virtual rig azimuth_max must exceed azimuth_min");
    }
    const double step = (rig.azimuth_max - rig.azimuth_min) / rig.azimuth_steps;
    for (std::size_t b = 0; b < rig.beam_elevations.size(); ++b) {
      const double el = rig.beam_elevations[b];
      for (int s = 0; s < rig.azimuth_steps; ++s) {
        const double az = rig.azimuth_min + (s + 0.5) * step;
        const Eigen::Vector3d dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                  std::sin(el));
        emit(Eigen::Vector3d::Zero(), dir, static_cast<std::uint32_t>(b));
      }
    }
  } else {
    if (t.norm() != 0.0) {
      throw ParameterError("camera-pixel ray layout requires a zero LiDAR-to-camera translation");
    }
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        emit(Eigen::Vector3d::Zero(), pixel_ray(u, v), static_cast<std::uint32_t>(v));
      }
    }
  }
  out.cloud = PointCloud(std::move(points), std::move(beams));

  out.rgb = FeatureGrid::image(cam.width, cam.height, 3);
  out.rgb_labels = LabelGrid(cam.width, cam.height, scene.background_class);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const RayHit hit = cast_ray(scene, cam_center, pixel_ray(u, v));
      const int cls = hit ? hit.class_id : scene.background_class;
      const auto color = class_color(cls);
      for (int c = 0; c < 3; ++c) out.rgb.at(u, v, c) = color[static_cast<std::size_t>(c)];
      out.rgb_labels.at(u, v) = cls;
    }
  }
  return out;
}

// LiDAR x forward / y left / z up to camera x right / y down / z forward.
inline Eigen::Matrix3d lidar_to_camera_axes() {
  Eigen::Matrix3d r;
  r << 0, -1, 0,
       0, 0, -1,
       1, 0, 0;
  return r;
}

// Rig resembling the KITTI setup: 64 uniformly spaced beams, 512 azimuth
// steps over the frontal 90 degrees, 1242 x 375 camera slightly offset.
inline VirtualRig kitti_like_rig() {
  VirtualRig rig;
  const int beams = 64;
  const double lo = -24.9 * std::numbers::pi / 180.0;
  const double hi = 2.0 * std::numbers::pi / 180.0;
  for (int b = 0; b < beams; ++b) rig.beam_elevations.push_back(lo + (hi - lo) * (b + 0.5) / beams);
  rig.lidar_to_camera.leftCols<3>() = lidar_to_camera_axes();
  rig.lidar_to_camera.col(3) = Eigen::Vector3d(0.0, -0.08, -0.27);
  return rig;
}

// Rig whose LiDAR rays are the camera's pixel rays. Camera axes are a proper
// rotation with u growing with azimuth and v growing with elevation, so range
// column = u and row = v when the range grid uses the returned config:
// width columns of 1/focal radians centered on the optical axis.
struct CoincidentRig {
  VirtualRig rig;
  double azimuth_half_width = 0.0;
};

inline GridConfig grid_config(const CoincidentRig& c) {
  return GridConfig{c.rig.camera.width, c.rig.camera.height, -c.azimuth_half_width,
                    c.azimuth_half_width};
}

inline CoincidentRig coincident_rig(int width, int height, double focal) {
  CoincidentRig out;
  VirtualRig& rig = out.rig;
  rig.layout = RayLayout::camera_pixels;
  rig.camera = PinholeCamera{focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  Eigen::Matrix3d r;
  r << 0, 1, 0,
       0, 0, 1,
       1, 0, 0;
  rig.lidar_to_camera.leftCols<3>() = r;
  rig.lidar_to_camera.col(3).setZero();
  rig.azimuth_steps = width;
  out.azimuth_half_width = 0.5 * width / focal;
  rig.azimuth_min = -out.azimuth_half_width;
  rig.azimuth_max = out.azimuth_half_width;
  return out;
}

// Street-like scene: ground slab, cars (boxes), pedestrians (cylinders),
// cyclists (thin boxes). Classes: 0 background, 1 car, 2 pedestrian, 3 cyclist.
inline SceneDescription street_scene() {
  SceneDescription s;
  s.boxes.push_back({{0.0, -40.0, -1.93}, {80.0, 40.0, -1.73}, 0});
  s.boxes.push_back({{8.0, -3.5, -1.73}, {12.2, -1.7, -0.25}, 1});
  s.boxes.push_back({{15.0, 1.8, -1.73}, {19.5, 3.6, -0.2}, 1});
  s.boxes.push_back({{25.0, -6.0, -1.73}, {29.0, -4.2, -0.3}, 1});
  s.cylinders.push_back({10.0, 4.0, 0.3, -1.73, 0.05, 2});
  s.cylinders.push_back({20.0, -1.0, 0.3, -1.73, 0.0, 2});
  s.boxes.push_back({{13.0, -0.6, -1.73}, {14.8, -0.2, 0.0}, 3});
  s.boxes.push_back({{60.0, -12.0, -1.73}, {62.0, 12.0, 6.0}, 0});
  return s;
}

// Zero-depth panels facing the sensor at power-of-two distances. Every hit
// lies on a plane x = const, so with a coincident rig whose focal length is
// a power of two the stored float points and their projections are exact.
// Classes: 0 back wall, 1 car, 2 pedestrian, 3 cyclist.
inline SceneDescription fronto_parallel_scene() {
  SceneDescription s;
  auto panel = [&s](double x, double y0, double y1, double z0, double z1, int cls) {
    s.boxes.push_back({{x, y0, z0}, {x, y1, z1}, cls});
  };
  panel(32.0, -1.5, 1.5, -4.0, 4.0, 0);
  panel(16.0, 0.1, 0.7, -4.0, 4.0, 1);
  panel(8.0, -0.3, -0.1, -4.0, 4.0, 2);
  panel(16.0, -0.95, -0.7, -4.0, 0.0, 3);
  return s;
}

}  // namespace rangefuse
