#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rangefuse/calibration.hpp"
#include "rangefuse/detail/binary.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/pointcloud.hpp"

namespace rangefuse {

namespace detail {

inline PointCloud decode_points(const std::vector<unsigned char>& bytes, std::size_t record_size,
                                bool with_beam_ids, const std::string& name) {
  if (bytes.size() % record_size != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % record_size;
    throw FormatError("'" + name + "': truncated point record at byte offset " +
                      std::to_string(offset) + " (file size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(record_size) + ")");
  }
  const std::size_t n = bytes.size() / record_size;
  std::vector<Point> points(n);
  std::vector<std::uint32_t> beams;
  if (with_beam_ids) beams.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = bytes.data() + i * record_size;
    Point& pt = points[i];
    pt.x = load_f32_le(p);
    pt.y = load_f32_le(p + 4);
    pt.z = load_f32_le(p + 8);
    pt.intensity = load_f32_le(p + 12);
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z) ||
        !std::isfinite(pt.intensity)) {
      throw FormatError("'" + name + "': non-finite value in point " + std::to_string(i));
    }
    if (with_beam_ids) beams[i] = load_u32_le(p + 16);
  }
  if (with_beam_ids) return PointCloud(std::move(points), std::move(beams));
  return PointCloud(std::move(points));
}

}  // namespace detail

// KITTI velodyne dump: consecutive little-endian float32 (x, y, z, reflectance).
inline PointCloud load_kitti_velodyne(const std::filesystem::path& path) {
  return detail::decode_points(detail::read_file_bytes(path), 16, false, path.string());
}

inline void write_kitti_velodyne(const std::filesystem::path& path, const PointCloud& cloud) {
  std::vector<unsigned char> out;
  out.reserve(cloud.size() * 16);
  for (const Point& p : cloud.points()) {
    detail::put_f32_le(out, p.x);
    detail::put_f32_le(out, p.y);
    detail::put_f32_le(out, p.z);
    detail::put_f32_le(out, p.intensity);
  }
  detail::write_file_atomic(path, out);
}

// Native extended format: KITTI record followed by a little-endian uint32 beam id.
inline PointCloud load_native_cloud(const std::filesystem::path& path) {
  return detail::decode_points(detail::read_file_bytes(path), 20, true, path.string());
}

inline void write_native_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  if (!cloud.has_beam_ids()) {
    throw PreconditionError("native cloud format requires beam ids");
  }
  std::vector<unsigned char> out;
  out.reserve(cloud.size() * 20);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    detail::put_f32_le(out, p.x);
    detail::put_f32_le(out, p.y);
    detail::put_f32_le(out, p.z);
    detail::put_f32_le(out, p.intensity);
    detail::put_u32_le(out, cloud.beam_ids()[i]);
  }
  detail::write_file_atomic(path, out);
}

// One little-endian uint32 class id per point.
inline std::vector<std::uint32_t> load_labels(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() % 4 != 0) {
    throw FormatError("'" + path.string() + "': truncated label at byte offset " +
                      std::to_string(bytes.size() - bytes.size() % 4));
  }
  std::vector<std::uint32_t> labels(bytes.size() / 4);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = detail::load_u32_le(&bytes[i * 4]);
  return labels;
}

inline void write_labels(const std::filesystem::path& path,
                         const std::vector<std::uint32_t>& labels) {
  std::vector<unsigned char> out;
  out.reserve(labels.size() * 4);
  for (std::uint32_t l : labels) detail::put_u32_le(out, l);
  detail::write_file_atomic(path, out);
}

struct BeamReconstruction {
  PointCloud cloud;
  std::size_t wrap_events = 0;
  std::vector<std::string> warnings;
};

// Assigns beam ids to a scan-ordered cloud: each time the atan2 azimuth drops
// by more than pi relative to the previous point a new beam starts.
inline BeamReconstruction reconstruct_beam_ids(const PointCloud& cloud, std::uint32_t num_beams) {
  if (num_beams < 1) throw ParameterError("num_beams must be at least 1");
  BeamReconstruction result;
  std::vector<std::uint32_t> beams(cloud.size(), 0);
  std::uint32_t beam = 0;
  std::size_t overflow_points = 0;
  double prev = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    const double az = std::atan2(static_cast<double>(p.y), static_cast<double>(p.x));
    if (i > 0 && az < prev - std::numbers::pi) {
      ++result.wrap_events;
      if (beam + 1 < num_beams) ++beam;
    }
    if (result.wrap_events >= num_beams) ++overflow_points;
    beams[i] = beam;
    prev = az;
  }
  if (result.wrap_events >= num_beams) {
    result.warnings.push_back(std::to_string(result.wrap_events + 1) +
                              " beams detected but only " + std::to_string(num_beams) +
                              " configured; " + std::to_string(overflow_points) +
                              " excess points assigned to beam " + std::to_string(num_beams - 1));
  }
  result.cloud = PointCloud(cloud.points(), std::move(beams));
  return result;
}

namespace detail {

inline std::map<std::string, std::vector<double>> parse_calibration_rows(std::istream& in) {
  std::map<std::string, std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key.back() != ':') continue;
    key.pop_back();
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError("calibration key '" + key + ":' has non-numeric entry '" + tok + "'");
      }
    }
    rows[key] = std::move(values);
  }
  return rows;
}

template <int Rows, int Cols>
Eigen::Matrix<double, Rows, Cols> calibration_block(
    const std::map<std::string, std::vector<double>>& rows, const std::string& key) {
  auto it = rows.find(key);
  if (it == rows.end()) throw FormatError("calibration is missing key '" + key + ":'");
  if (it->second.size() != static_cast<std::size_t>(Rows * Cols)) {
    throw FormatError("calibration key '" + key + ":' has " + std::to_string(it->second.size()) +
                      " entries, expected " + std::to_string(Rows * Cols));
  }
  Eigen::Matrix<double, Rows, Cols> m;
  for (int r = 0; r < Rows; ++r)
    for (int c = 0; c < Cols; ++c) m(r, c) = it->second[r * Cols + c];
  return m;
}

}  // namespace detail

// Reads P2, R0_rect and Tr_velo_to_cam from KITTI calibration text.
inline CalibrationSet parse_kitti_calibration(std::istream& in) {
  const auto rows = detail::parse_calibration_rows(in);
  return CalibrationSet(detail::calibration_block<3, 4>(rows, "P2"),
                        detail::calibration_block<3, 3>(rows, "R0_rect"),
                        detail::calibration_block<3, 4>(rows, "Tr_velo_to_cam"));
}

inline CalibrationSet load_kitti_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse_kitti_calibration(in);
}

inline std::string format_kitti_calibration(const CalibrationSet& calib) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto row = [&os](const char* key, const auto& m) {
    os << key << ':';
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) os << ' ' << m(r, c);
    os << '\n';
  };
  row("P2", calib.camera_intrinsics_projective());
  row("R0_rect", calib.rectifying_rotation());
  row("Tr_velo_to_cam", calib.lidar_to_camera());
  return os.str();
}

inline void write_kitti_calibration(const std::filesystem::path& path,
                                    const CalibrationSet& calib) {
  detail::write_file_atomic(path, format_kitti_calibration(calib));
}

}  // namespace rangefuse
