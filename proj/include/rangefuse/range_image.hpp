#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rangefuse/detail/binary.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/pointcloud.hpp"

namespace rangefuse {

// Azimuth binning and image dimensions. Azimuth range is half-open:
// [azimuth_min, azimuth_max).
struct GridConfig {
  int width = 512;
  int num_beams = 64;
  double azimuth_min = -std::numbers::pi / 4;
  double azimuth_max = std::numbers::pi / 4;

  double azimuth_step() const { return (azimuth_max - azimuth_min) / width; }

  void validate() const {
    if (width < 1 || num_beams < 1) throw ParameterError("grid width and beam count must be >= 1");
    if (!(azimuth_max > azimuth_min)) throw ParameterError("azimuth_max must exceed azimuth_min");
  }
};

// Row assignment by the point's beam id.
struct BeamRows {};

// Row assignment by zenith discretization: row = floor((theta - min) / step).
struct SphericalRows {
  double zenith_step = 0.0;
  double zenith_min = 0.0;
};

using RowMode = std::variant<BeamRows, SphericalRows>;

// arcsin(y / sqrt(x^2 + y^2)), evaluated as atan2(y, |x|): identical in exact
// arithmetic and well conditioned near +-pi/2. Unambiguous only for x >= 0.
inline double azimuth_of(double x, double y, double /*z*/ = 0.0) {
  if (x == 0.0 && y == 0.0) throw DegenerateDirectionError("azimuth undefined for x = y = 0");
  return std::atan2(y, std::abs(x));
}

// arcsin(z / r), evaluated as atan2(z, sqrt(x^2 + y^2)).
inline double zenith_of(double x, double y, double z) {
  if (x == 0.0 && y == 0.0 && z == 0.0) {
    throw DegenerateDirectionError("zenith undefined for a zero-length point");
  }
  return std::atan2(z, std::hypot(x, y));
}

// Dense H x W LiDAR image with channels (x, y, z, range, intensity).
class RangeImage {
 public:
  static constexpr int kChannels = 5;
  static constexpr std::int64_t kNoSource = -1;

  RangeImage() = default;

  // All-invalid image.
  explicit RangeImage(const GridConfig& cfg)
      : RangeImage(cfg, std::vector<float>(cell_count(cfg) * kChannels, 0.0f),
                   std::vector<std::uint8_t>(cell_count(cfg), 0),
                   std::vector<std::int64_t>(cell_count(cfg), kNoSource)) {}

  RangeImage(const GridConfig& cfg, std::vector<float> channels, std::vector<std::uint8_t> valid,
             std::vector<std::int64_t> source_index)
      : cfg_(cfg),
        channels_(std::move(channels)),
        valid_(std::move(valid)),
        source_index_(std::move(source_index)) {
    cfg_.validate();
    const std::size_t n = cell_count(cfg_);
    if (channels_.size() != n * kChannels || valid_.size() != n || source_index_.size() != n) {
      throw ShapeError("range image buffers do not match " + std::to_string(cfg_.num_beams) + "x" +
                       std::to_string(cfg_.width));
    }
  }

  int width() const noexcept { return cfg_.width; }
  int height() const noexcept { return cfg_.num_beams; }
  const GridConfig& config() const noexcept { return cfg_; }
  double azimuth_min() const noexcept { return cfg_.azimuth_min; }
  double azimuth_max() const noexcept { return cfg_.azimuth_max; }

  bool valid(int row, int col) const { return valid_[cell(row, col)] != 0; }
  float channel(int row, int col, int c) const { return channels_[cell(row, col) * kChannels + c]; }
  Point point(int row, int col) const {
    const float* p = &channels_[cell(row, col) * kChannels];
    return Point{p[0], p[1], p[2], p[4]};
  }
  std::optional<std::size_t> source_index(int row, int col) const {
    const auto s = source_index_[cell(row, col)];
    if (s == kNoSource) return std::nullopt;
    return static_cast<std::size_t>(s);
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v != 0;
    return n;
  }

  const std::vector<float>& channels() const noexcept { return channels_; }
  const std::vector<std::uint8_t>& valid_mask() const noexcept { return valid_; }

  // The five channels as a stride-1 feature grid (x = column, y = row).
  FeatureGrid as_feature_grid() const {
    return FeatureGrid::image(width(), height(), kChannels, channels_);
  }

 private:
  static std::size_t cell_count(const GridConfig& cfg) {
    return static_cast<std::size_t>(std::max(cfg.width, 0)) *
           static_cast<std::size_t>(std::max(cfg.num_beams, 0));
  }
  std::size_t cell(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cfg_.width) +
           static_cast<std::size_t>(col);
  }

  GridConfig cfg_;
  std::vector<float> channels_;
  std::vector<std::uint8_t> valid_;
  std::vector<std::int64_t> source_index_;
};

namespace detail {

// Column of an azimuth, or -1 when outside [azimuth_min, azimuth_max).
inline int azimuth_column(const GridConfig& cfg, double azimuth) {
  if (!(azimuth >= cfg.azimuth_min) || !(azimuth < cfg.azimuth_max)) return -1;
  const double col = std::floor((azimuth - cfg.azimuth_min) / cfg.azimuth_step());
  if (col < 0.0 || col >= cfg.width) return -1;
  return static_cast<int>(col);
}

}  // namespace detail

// Column index of a stored point under `cfg`, or nullopt when it has no bin.
inline std::optional<int> azimuth_bin(const GridConfig& cfg, const Point& p) {
  if (p.x < 0.0f || (p.x == 0.0f && p.y == 0.0f)) return std::nullopt;
  const int col = detail::azimuth_column(cfg, azimuth_of(p.x, p.y));
  if (col < 0) return std::nullopt;
  return col;
}

// Points behind the sensor (x < 0) are dropped: the arcsin azimuth cannot
// tell them apart from forward points. On a cell collision the point nearest
// the bin's azimuth center wins, ties going to the lower point index.
inline RangeImage build_range_image(const PointCloud& cloud, const GridConfig& cfg,
                                    const RowMode& mode = BeamRows{}) {
  cfg.validate();
  const bool by_beam = std::holds_alternative<BeamRows>(mode);
  if (by_beam && !cloud.has_beam_ids()) {
    throw PreconditionError("beam-id row mode requires a cloud with beam ids");
  }
  SphericalRows sph{};
  if (!by_beam) {
    sph = std::get<SphericalRows>(mode);
    if (!(sph.zenith_step > 0.0)) throw ParameterError("spherical zenith step must be positive");
  }

  const int W = cfg.width;
  const int H = cfg.num_beams;
  const std::size_t cells = static_cast<std::size_t>(W) * static_cast<std::size_t>(H);
  const double step = cfg.azimuth_step();
  std::vector<double> best_dist(cells, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> best_index(cells, RangeImage::kNoSource);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    const auto col = azimuth_bin(cfg, p);
    if (!col) continue;
    int row;
    if (by_beam) {
      const std::uint32_t beam = cloud.beam_ids()[i];
      if (beam >= static_cast<std::uint32_t>(H)) {
        throw PreconditionError("point " + std::to_string(i) + " has beam id " +
                                std::to_string(beam) + " >= image height " + std::to_string(H));
      }
      row = static_cast<int>(beam);
    } else {
      const double r2 = double{p.x} * p.x + double{p.y} * p.y + double{p.z} * p.z;
      if (r2 == 0.0) continue;
      const double r = std::floor((zenith_of(p.x, p.y, p.z) - sph.zenith_min) / sph.zenith_step);
      if (r < 0.0 || r >= H) continue;
      row = static_cast<int>(r);
    }
    const double center = cfg.azimuth_min + (*col + 0.5) * step;
    const double dist = std::abs(azimuth_of(p.x, p.y) - center);
    const std::size_t c = static_cast<std::size_t>(row) * W + static_cast<std::size_t>(*col);
    // Indices arrive in increasing order, so strict < keeps the lower index on ties.
    if (dist < best_dist[c]) {
      best_dist[c] = dist;
      best_index[c] = static_cast<std::int64_t>(i);
    }
  }

  std::vector<float> channels(cells * RangeImage::kChannels, 0.0f);
  std::vector<std::uint8_t> valid(cells, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    if (best_index[c] == RangeImage::kNoSource) continue;
    const Point& p = cloud[static_cast<std::size_t>(best_index[c])];
    float* out = &channels[c * RangeImage::kChannels];
    out[0] = p.x;
    out[1] = p.y;
    out[2] = p.z;
    out[3] = static_cast<float>(
        std::sqrt(double{p.x} * p.x + double{p.y} * p.y + double{p.z} * p.z));
    out[4] = p.intensity;
    valid[c] = 1;
  }
  return RangeImage(cfg, std::move(channels), std::move(valid), std::move(best_index));
}

// One point per valid pixel, row-major. Beam ids are the pixel rows.
inline PointCloud round_trip_points(const RangeImage& img) {
  std::vector<Point> pts;
  std::vector<std::uint32_t> beams;
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (!img.valid(r, c)) continue;
      pts.push_back(img.point(r, c));
      beams.push_back(static_cast<std::uint32_t>(r));
    }
  }
  return PointCloud(std::move(pts), std::move(beams));
}

// Binary layout (little-endian):
//   "RFRIMG01" | u32 W | u32 H | f64 azimuth_min | f64 azimuth_max |
//   H*W*5 f32 channels (row-major, channel-last) | H*W u8 validity
// Source indices are not stored.
inline constexpr char kRangeImageMagic[8] = {'R', 'F', 'R', 'I', 'M', 'G', '0', '1'};

inline std::vector<unsigned char> encode_range_image(const RangeImage& img) {
  std::vector<unsigned char> out(kRangeImageMagic, kRangeImageMagic + 8);
  detail::put_u32_le(out, static_cast<std::uint32_t>(img.width()));
  detail::put_u32_le(out, static_cast<std::uint32_t>(img.height()));
  detail::put_f64_le(out, img.azimuth_min());
  detail::put_f64_le(out, img.azimuth_max());
  out.reserve(out.size() + img.channels().size() * 4 + img.valid_mask().size());
  for (float v : img.channels()) detail::put_f32_le(out, v);
  out.insert(out.end(), img.valid_mask().begin(), img.valid_mask().end());
  return out;
}

inline RangeImage decode_range_image(const std::vector<unsigned char>& bytes) {
  constexpr std::size_t kHeader = 8 + 4 + 4 + 8 + 8;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kRangeImageMagic, 8) != 0) {
    throw FormatError("not a range image file (bad magic or short header)");
  }
  GridConfig cfg;
  cfg.width = static_cast<int>(detail::load_u32_le(&bytes[8]));
  cfg.num_beams = static_cast<int>(detail::load_u32_le(&bytes[12]));
  cfg.azimuth_min = detail::load_f64_le(&bytes[16]);
  cfg.azimuth_max = detail::load_f64_le(&bytes[24]);
  cfg.validate();
  const std::size_t cells = static_cast<std::size_t>(cfg.width) * cfg.num_beams;
  const std::size_t expected = kHeader + cells * RangeImage::kChannels * 4 + cells;
  if (bytes.size() != expected) {
    throw FormatError("range image payload is " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expected));
  }
  std::vector<float> channels(cells * RangeImage::kChannels);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    channels[i] = detail::load_f32_le(&bytes[kHeader + i * 4]);
  }
  const std::size_t mask_at = kHeader + channels.size() * 4;
  std::vector<std::uint8_t> valid(bytes.begin() + static_cast<std::ptrdiff_t>(mask_at),
                                  bytes.end());
  for (auto& v : valid) v = v != 0;
  return RangeImage(cfg, std::move(channels), std::move(valid),
                    std::vector<std::int64_t>(cells, RangeImage::kNoSource));
}

inline void write_range_image(const std::filesystem::path& path, const RangeImage& img) {
  detail::write_file_atomic(path, encode_range_image(img));
}

inline RangeImage read_range_image(const std::filesystem::path& path) {
  return decode_range_image(detail::read_file_bytes(path));
}

}  // namespace rangefuse
