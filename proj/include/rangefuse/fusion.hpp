#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rangefuse/calibration.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/pointcloud.hpp"
#include "rangefuse/projection.hpp"
#include "rangefuse/range_image.hpp"
#include "rangefuse/sampling.hpp"
#include "rangefuse/spline.hpp"
#include "rangefuse/synthetic.hpp"

namespace rangefuse {

// Pixel-center scaling between a grid at `stride` and its source image:
// grid index i covers source pixels [i*s, (i+1)*s), centered at (i+0.5)*s-0.5.
inline double grid_to_source(double i, double stride) { return (i + 0.5) * stride - 0.5; }
inline double source_to_grid(double p, double stride) { return (p + 0.5) / stride - 0.5; }

struct LayerPair {
  double range_stride = 1.0;
  double rgb_stride = 1.0;
  std::string label;
};

struct FusionPlan {
  std::vector<LayerPair> layer_pairs;
  std::size_t control_count = 48;
  double lambda = 0.0;

  void validate() const {
    if (control_count < 3) throw ParameterError("fusion plan needs at least 3 control points");
    if (!(lambda >= 0.0)) throw ParameterError("fusion plan lambda must be >= 0");
    std::set<std::string> labels;
    for (const auto& p : layer_pairs) {
      if (!(p.range_stride > 0.0) || !(p.rgb_stride > 0.0)) {
        throw ParameterError("layer '" + p.label + "' has a non-positive stride");
      }
      if (!labels.insert(p.label).second) {
        throw ParameterError("duplicate layer label '" + p.label + "'");
      }
    }
  }

  // Three fusion points: range-branch strides 4, 8, 16 paired with RGB
  // encoder strides 8, 16, 32.
  static FusionPlan three_level(std::size_t k = 48, double lambda = 0.0) {
    return FusionPlan{{{4, 8, "fire2"}, {8, 16, "fire4"}, {16, 32, "fire7"}}, k, lambda};
  }
};

// Target shape of a warped layer: its size, stride and the range image it
// belongs to.
struct RangeLayer {
  int width = 0;
  int height = 0;
  double stride = 1.0;
  ImageSize source;
};

// RGB-feature coordinates sampled for every pixel of `range_layer`, row-major.
inline Eigen::MatrixX2d warp_query_positions(const SplineWarp& warp, const RangeLayer& range_layer,
                                             double rgb_stride) {
  Eigen::MatrixX2d pos(static_cast<Eigen::Index>(range_layer.width) * range_layer.height, 2);
  Eigen::Index k = 0;
  for (int j = 0; j < range_layer.height; ++j) {
    const double y = grid_to_source(j, range_layer.stride);
    for (int i = 0; i < range_layer.width; ++i, ++k) {
      const Eigen::Vector2d uv = warp(grid_to_source(i, range_layer.stride), y);
      pos(k, 0) = source_to_grid(uv.x(), rgb_stride);
      pos(k, 1) = source_to_grid(uv.y(), rgb_stride);
    }
  }
  return pos;
}

// Resamples `rgb_feat` onto the pixels of a range-side layer: range feature
// pixel -> range image coordinates -> spline -> RGB image coordinates -> RGB
// feature coordinates -> bilinear sample, zero outside the RGB feature grid.
inline FeatureGrid warp_feature_layer(const FeatureGrid& rgb_feat, const SplineWarp& warp,
                                      const RangeLayer& range_layer, ImageSize rgb_input_size) {
  if (rgb_feat.source_size() != rgb_input_size) {
    throw PreconditionError("RGB feature grid was derived from a " +
                            std::to_string(rgb_feat.source_size().width) + "x" +
                            std::to_string(rgb_feat.source_size().height) + " image, expected " +
                            std::to_string(rgb_input_size.width) + "x" +
                            std::to_string(rgb_input_size.height));
  }
  FeatureGrid out(range_layer.width, range_layer.height, rgb_feat.channels(), range_layer.stride,
                  range_layer.source);
  const Eigen::MatrixX2d pos = warp_query_positions(warp, range_layer, rgb_feat.stride());
  Eigen::Index k = 0;
  for (int j = 0; j < range_layer.height; ++j) {
    for (int i = 0; i < range_layer.width; ++i, ++k) {
      bilinear_sample_into(rgb_feat, pos(k, 0), pos(k, 1), out.pixel(i, j));
    }
  }
  return out;
}

// Channel concatenation, range channels first.
inline FeatureGrid fuse(const FeatureGrid& range_feat, const FeatureGrid& warped_rgb) {
  if (range_feat.width() != warped_rgb.width() || range_feat.height() != warped_rgb.height() ||
      range_feat.stride() != warped_rgb.stride()) {
    throw ShapeError("cannot fuse range features " + range_feat.shape_string() +
                     " with warped RGB features " + warped_rgb.shape_string());
  }
  const int cr = range_feat.channels();
  const int cg = warped_rgb.channels();
  FeatureGrid out(range_feat.width(), range_feat.height(), cr + cg, range_feat.stride(),
                  range_feat.source_size());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      auto dst = out.pixel(x, y);
      const auto a = range_feat.pixel(x, y);
      const auto b = warped_rgb.pixel(x, y);
      std::copy(a.begin(), a.end(), dst.begin());
      std::copy(b.begin(), b.end(), dst.begin() + cr);
    }
  }
  return out;
}

// 2x2 mean pooling; odd trailing rows/columns are dropped.
inline FeatureGrid average_pool_2x2(const FeatureGrid& in) {
  const int w = in.width() / 2;
  const int h = in.height() / 2;
  if (w < 1 || h < 1) {
    throw ParameterError("grid " + in.shape_string() + " is too small to pool");
  }
  FeatureGrid out(w, h, in.channels(), in.stride() * 2.0, in.source_size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto dst = out.pixel(x, y);
      const auto a = in.pixel(2 * x, 2 * y);
      const auto b = in.pixel(2 * x + 1, 2 * y);
      const auto c = in.pixel(2 * x, 2 * y + 1);
      const auto d = in.pixel(2 * x + 1, 2 * y + 1);
      for (std::size_t ch = 0; ch < dst.size(); ++ch) {
        dst[ch] = 0.25f * ((a[ch] + b[ch]) + (c[ch] + d[ch]));
      }
    }
  }
  return out;
}

struct FeatureLevel {
  int stride = 1;
  int channels = 1;
};

// Deterministic stand-in for a CNN encoder. Level strides are powers of two
// relative to the input; each level is the input pooled down to its stride,
// with channels replicated cyclically or truncated to the requested count.
class StubExtractor {
 public:
  StubExtractor() = default;

  explicit StubExtractor(std::vector<FeatureLevel> levels) : levels_(std::move(levels)) {
    int prev = 1;
    for (const auto& l : levels_) {
      if (l.channels < 1) throw ParameterError("feature level channel count must be >= 1");
      if (l.stride < 1 || (l.stride & (l.stride - 1)) != 0) {
        throw ParameterError("stub feature strides must be powers of two, got " +
                             std::to_string(l.stride));
      }
      if (l.stride < prev) throw ParameterError("stub feature strides must be non-decreasing");
      prev = l.stride;
    }
  }

  const std::vector<FeatureLevel>& levels() const noexcept { return levels_; }

  std::vector<FeatureGrid> operator()(const FeatureGrid& input) const {
    std::vector<FeatureGrid> out;
    out.reserve(levels_.size());
    FeatureGrid current = input;
    int current_stride = 1;
    for (const auto& l : levels_) {
      while (current_stride < l.stride) {
        current = average_pool_2x2(current);
        current_stride *= 2;
      }
      out.push_back(select_channels(current, l.channels));
    }
    return out;
  }

 private:
  static FeatureGrid select_channels(const FeatureGrid& in, int channels) {
    if (in.channels() == channels) return in;
    if (in.channels() < 1) throw ParameterError("cannot replicate channels of an empty grid");
    FeatureGrid out(in.width(), in.height(), channels, in.stride(), in.source_size());
    for (int y = 0; y < in.height(); ++y) {
      for (int x = 0; x < in.width(); ++x) {
        const auto src = in.pixel(x, y);
        auto dst = out.pixel(x, y);
        for (int c = 0; c < channels; ++c) dst[c] = src[static_cast<std::size_t>(c % in.channels())];
      }
    }
    return out;
  }

  std::vector<FeatureLevel> levels_;
};

inline StubExtractor make_stub_extractor(std::vector<FeatureLevel> levels) {
  return StubExtractor(std::move(levels));
}

enum class SeedPolicy {
  center,  // correspondence nearest the range image center
  index0,  // first correspondence in scan order
};

inline std::size_t select_seed(const CorrespondenceSet& corr, SeedPolicy policy) {
  if (corr.empty()) throw DegenerateGeometryError("no correspondences to seed sampling");
  if (policy == SeedPolicy::index0) return 0;
  const Eigen::Vector2d center((corr.range_size.width - 1) / 2.0,
                               (corr.range_size.height - 1) / 2.0);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double d = (corr.items[i].range_px - center).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

struct PipelineOptions {
  GridConfig grid;
  RowMode mode = BeamRows{};
  SeedPolicy seed_policy = SeedPolicy::center;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct PipelineResult {
  RangeImage range_image;
  CorrespondenceSet correspondences;
  std::vector<std::size_t> control_indices;
  std::shared_ptr<const SplineWarp> warp;
  std::size_t fit_count = 0;
  std::vector<FeatureGrid> fused;
  // Spline used for each fused layer; all entries alias `warp`.
  std::vector<const SplineWarp*> layer_warps;
  std::vector<StageTiming> timings;
};

inline std::string format_timings(const std::vector<StageTiming>& timings) {
  std::ostringstream os;
  for (const auto& t : timings) os << t.stage << '=' << t.milliseconds << '\n';
  return os.str();
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <class F>
  auto time(std::string stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(std::move(stage), t0);
    } else {
      auto r = f();
      record(std::move(stage), t0);
      return r;
    }
  }

 private:
  void record(std::string stage, std::chrono::steady_clock::time_point t0) {
    const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    sink_.push_back({std::move(stage), dt.count()});
  }

  std::vector<StageTiming>& sink_;
};

inline const FeatureGrid& level_with_stride(const std::vector<FeatureGrid>& levels, double stride,
                                            const char* branch, const std::string& label) {
  for (const auto& g : levels) {
    if (g.stride() == stride) return g;
  }
  std::ostringstream os;
  os << branch << " extractor produced no grid at stride " << stride << " for layer '" << label
     << "'";
  throw PreconditionError(os.str());
}

}  // namespace detail

// Range image -> correspondences -> FPS control points -> one spline fit ->
// per layer pair: warp RGB features, concatenate with range features.
template <class RgbExtractor, class RangeExtractor>
PipelineResult run_fusion_pipeline(const PointCloud& cloud, const FeatureGrid& rgb,
                                   const CalibrationSet& calib, const FusionPlan& plan,
                                   const RgbExtractor& rgb_extractor,
                                   const RangeExtractor& range_extractor,
                                   const PipelineOptions& options = {}) {
  plan.validate();
  PipelineResult result;
  detail::StageClock clock(result.timings);

  result.range_image = clock.time("build_range", [&] {
    return build_range_image(cloud, options.grid, options.mode);
  });
  result.correspondences = clock.time("correspondences", [&] {
    return build_correspondences(result.range_image, calib, rgb.size());
  });
  if (plan.layer_pairs.empty()) return result;

  const CorrespondenceSet& corr = result.correspondences;
  if (corr.size() < 3) {
    throw DegenerateGeometryError("only " + std::to_string(corr.size()) +
                                  " range/RGB correspondences; at least 3 are needed to warp");
  }
  result.control_indices = clock.time("fps", [&] {
    const std::size_t k = std::min(plan.control_count, corr.size());
    return farthest_point_sample(corr.range_points(), k, select_seed(corr, options.seed_policy));
  });
  result.warp = clock.time("fit", [&] {
    return std::make_shared<const SplineWarp>(
        fit_spline(corr.subset(result.control_indices), plan.lambda));
  });
  result.fit_count = 1;

  const std::vector<FeatureGrid> rgb_levels = rgb_extractor(rgb);
  const std::vector<FeatureGrid> range_levels = range_extractor(result.range_image.as_feature_grid());
  const ImageSize range_size{result.range_image.width(), result.range_image.height()};

  for (const auto& pair : plan.layer_pairs) {
    const FeatureGrid& rgb_feat =
        detail::level_with_stride(rgb_levels, pair.rgb_stride, "RGB", pair.label);
    const FeatureGrid& range_feat =
        detail::level_with_stride(range_levels, pair.range_stride, "range", pair.label);
    const RangeLayer layer{range_feat.width(), range_feat.height(), range_feat.stride(),
                           range_size};
    FeatureGrid warped = clock.time("warp[" + pair.label + "]", [&] {
      return warp_feature_layer(rgb_feat, *result.warp, layer, rgb.source_size());
    });
    result.layer_warps.push_back(result.warp.get());
    result.fused.push_back(
        clock.time("fuse[" + pair.label + "]", [&] { return fuse(range_feat, warped); }));
  }
  return result;
}

template <class RgbExtractor, class RangeExtractor>
PipelineResult run_fusion_pipeline(const LabeledScene& scene, const FusionPlan& plan,
                                   const RgbExtractor& rgb_extractor,
                                   const RangeExtractor& range_extractor,
                                   const PipelineOptions& options = {}) {
  return run_fusion_pipeline(scene.cloud, scene.rgb, scene.calib, plan, rgb_extractor,
                             range_extractor, options);
}

}  // namespace rangefuse
