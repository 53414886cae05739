#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rangefuse/error.hpp"

namespace rangefuse {

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Dense H x W x C grid of float features, channel-last. `stride` is the
// number of source-image pixels per grid pixel; `source_size` is the size of
// the image the grid was derived from.
class FeatureGrid {
 public:
  FeatureGrid() = default;

  FeatureGrid(int width, int height, int channels, double stride, ImageSize source_size)
      : FeatureGrid(width, height, channels, stride, source_size,
                    std::vector<float>(checked_count(width, height, channels), 0.0f)) {}

  FeatureGrid(int width, int height, int channels, double stride, ImageSize source_size,
              std::vector<float> data)
      : width_(width),
        height_(height),
        channels_(channels),
        stride_(stride),
        source_size_(source_size),
        data_(std::move(data)) {
    if (data_.size() != checked_count(width, height, channels)) {
      throw ShapeError("feature data has " + std::to_string(data_.size()) + " values, expected " +
                       std::to_string(checked_count(width, height, channels)));
    }
    if (!(stride > 0.0) || !std::isfinite(stride)) {
      throw ParameterError("feature grid stride must be positive");
    }
    if (std::ceil(source_size.width / stride) < width ||
        std::ceil(source_size.height / stride) < height) {
      throw ParameterError("feature grid " + shape_string() + " exceeds its source " +
                           std::to_string(source_size.width) + "x" +
                           std::to_string(source_size.height) + " at stride " +
                           std::to_string(stride));
    }
  }

  // A stride-1 grid covering an image of the same size.
  static FeatureGrid image(int width, int height, int channels) {
    return FeatureGrid(width, height, channels, 1.0, ImageSize{width, height});
  }
  static FeatureGrid image(int width, int height, int channels, std::vector<float> data) {
    return FeatureGrid(width, height, channels, 1.0, ImageSize{width, height}, std::move(data));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  double stride() const noexcept { return stride_; }
  ImageSize source_size() const noexcept { return source_size_; }
  ImageSize size() const noexcept { return {width_, height_}; }

  float& at(int x, int y, int c) { return data_[index(x, y) + c]; }
  float at(int x, int y, int c) const { return data_[index(x, y) + c]; }

  std::span<float> pixel(int x, int y) {
    return {data_.data() + index(x, y), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> pixel(int x, int y) const {
    return {data_.data() + index(x, y), static_cast<std::size_t>(channels_)};
  }

  const std::vector<float>& data() const noexcept { return data_; }
  std::vector<float>& data() noexcept { return data_; }

  std::string shape_string() const {
    std::ostringstream os;
    os << height_ << "x" << width_ << "x" << channels_ << " (stride " << stride_ << ")";
    return os.str();
  }

 private:
  static std::size_t checked_count(int width, int height, int channels) {
    if (width < 0 || height < 0 || channels < 0) {
      throw ParameterError("feature grid dimensions must be non-negative");
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(channels);
  }

  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           static_cast<std::size_t>(channels_);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  double stride_ = 1.0;
  ImageSize source_size_{};
  std::vector<float> data_;
};

}  // namespace rangefuse
