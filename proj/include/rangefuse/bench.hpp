#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/fusion.hpp"
#include "rangefuse/projection.hpp"
#include "rangefuse/sampling.hpp"
#include "rangefuse/spline.hpp"

namespace rangefuse {

struct BenchRow {
  std::size_t control_count = 0;
  std::optional<double> median_ms;  // nullopt when skipped
  std::string note;
};

struct BenchOptions {
  std::vector<LayerPair> layer_pairs = FusionPlan::three_level().layer_pairs;
  int rgb_channels = 16;
  double lambda = 0.0;
  SeedPolicy seed_policy = SeedPolicy::center;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ParameterError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median wall-clock of spline fit + dense warp of every layer pair, per
// control-point count. Control points come from FPS outside the timed region.
inline std::vector<BenchRow> benchmark_control_points(const CorrespondenceSet& corr,
                                                      const std::vector<std::size_t>& counts,
                                                      int repetitions,
                                                      const BenchOptions& options = {}) {
  if (repetitions < 3) {
    throw ParameterError("benchmark needs at least 3 repetitions, got " +
                         std::to_string(repetitions));
  }
  const ImageSize rgb_size = corr.rgb_size;
  const ImageSize range_size = corr.range_size;

  std::vector<FeatureGrid> rgb_feats;
  std::vector<RangeLayer> layers;
  for (const auto& p : options.layer_pairs) {
    const int gw = std::max(1, static_cast<int>(rgb_size.width / p.rgb_stride));
    const int gh = std::max(1, static_cast<int>(rgb_size.height / p.rgb_stride));
    FeatureGrid g(gw, gh, options.rgb_channels, p.rgb_stride, rgb_size);
    for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] = static_cast<float>(i % 97) / 97.0f;
    rgb_feats.push_back(std::move(g));
    layers.push_back({std::max(1, static_cast<int>(range_size.width / p.range_stride)),
                      std::max(1, static_cast<int>(range_size.height / p.range_stride)),
                      p.range_stride, range_size});
  }

  std::vector<BenchRow> rows;
  for (std::size_t k : counts) {
    BenchRow row{k, std::nullopt, {}};
    if (k < 3 || k > corr.size()) {
      row.note = "skipped: " + std::to_string(corr.size()) + " correspondences available";
      rows.push_back(row);
      continue;
    }
    const auto idx =
        farthest_point_sample(corr.range_points(), k, select_seed(corr, options.seed_policy));
    const CorrespondenceSet controls = corr.subset(idx);
    std::vector<double> times;
    float sink = 0.0f;
    for (int rep = 0; rep < repetitions; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const SplineWarp warp = fit_spline(controls, options.lambda);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const FeatureGrid out = warp_feature_layer(rgb_feats[l], warp, layers[l], rgb_size);
        sink += out.data().empty() ? 0.0f : out.data()[out.data().size() / 2];
      }
      const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
      times.push_back(dt.count());
    }
    row.median_ms = median(times);
    if (!std::isfinite(sink)) row.note = "non-finite warp output";
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "controls median_ms note\n";
  for (const auto& r : rows) {
    os << r.control_count << ' ';
    if (r.median_ms) os << *r.median_ms; else os << '-';
    os << ' ' << (r.note.empty() ? "-" : r.note) << '\n';
  }
  return os.str();
}

}  // namespace rangefuse
