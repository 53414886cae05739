#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "rangefuse/detail/binary.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/range_image.hpp"
#include "rangefuse/synthetic.hpp"

namespace rangefuse {

// 8-bit binary PGM (1 channel) or PPM (3 channels), row-major, interleaved.
struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

inline std::vector<unsigned char> encode_pnm(const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3) throw ParameterError("PNM needs 1 or 3 channels");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw ShapeError("PNM payload size does not match its dimensions");
  }
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) +
                             "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline void write_pnm(const std::filesystem::path& path, const PnmImage& img) {
  detail::write_file_atomic(path, encode_pnm(img));
}

inline PnmImage decode_pnm(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError("malformed PNM header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > std::numeric_limits<int>::max()) throw FormatError("PNM dimension too large");
    }
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("only binary PGM (P5) and PPM (P6) are supported");
  }
  PnmImage img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  img.width = read_int();
  img.height = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw FormatError("only 8-bit PNM (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PNM header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (bytes.size() - pos < n) throw FormatError("PNM payload is truncated");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

inline PnmImage read_pnm(const std::filesystem::path& path) {
  return decode_pnm(detail::read_file_bytes(path));
}

inline std::uint8_t to_byte(double v01) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v01, 0.0, 1.0) * 255.0));
}

// PPM/PGM -> stride-1 grid with values in [0, 1].
inline FeatureGrid grid_from_pnm(const PnmImage& img) {
  FeatureGrid g = FeatureGrid::image(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) g.data()[i] = img.pixels[i] / 255.0f;
  return g;
}

inline PnmImage pnm_from_grid(const FeatureGrid& g) {
  if (g.channels() != 1 && g.channels() != 3) throw ParameterError("PNM needs 1 or 3 channels");
  PnmImage img{g.width(), g.height(), g.channels(), {}};
  img.pixels.reserve(g.data().size());
  for (float v : g.data()) img.pixels.push_back(to_byte(v));
  return img;
}

// Class masks are stored as PGM where the gray value is the class id and
// 255 means no class.
inline constexpr std::uint8_t kNoClassByte = 255;

inline LabelGrid labels_from_pgm(const PnmImage& img) {
  if (img.channels != 1) throw FormatError("label masks must be single-channel PGM");
  LabelGrid g(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    g.labels[i] = img.pixels[i] == kNoClassByte ? LabelGrid::kNoClass : img.pixels[i];
  }
  return g;
}

inline PnmImage pgm_from_labels(const LabelGrid& g) {
  PnmImage img{g.width, g.height, 1, {}};
  img.pixels.reserve(g.labels.size());
  for (auto l : g.labels) {
    if (l >= kNoClassByte) throw ParameterError("class id " + std::to_string(l) + " does not fit a PGM mask");
    img.pixels.push_back(l < 0 ? kNoClassByte : static_cast<std::uint8_t>(l));
  }
  return img;
}

enum class RenderChannel { range, intensity, validity, class_overlay };

inline constexpr std::uint8_t kInvalidGray = 128;

// Fixed overlay palette; no-class pixels are white.
inline std::array<std::uint8_t, 3> overlay_color(int class_id) {
  if (class_id < 0) return {255, 255, 255};
  const auto c = class_color(class_id);
  return {to_byte(c[0]), to_byte(c[1]), to_byte(c[2])};
}

// Range/intensity/validity render as PGM with per-image min-max normalization
// over valid pixels; class overlays render as PPM. Invalid pixels are gray 128.
// A constant channel maps every valid pixel to 255.
inline PnmImage render_range_image(const RangeImage& img, RenderChannel channel,
                                   const LabelGrid* labels = nullptr) {
  const int w = img.width();
  const int h = img.height();
  if (channel == RenderChannel::class_overlay) {
    if (!labels || labels->width != w || labels->height != h) {
      throw PreconditionError("class overlay needs a label grid matching the range image");
    }
    PnmImage out{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = (static_cast<std::size_t>(r) * w + c) * 3;
        if (!img.valid(r, c)) {
          out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = kInvalidGray;
          continue;
        }
        const auto col = overlay_color(labels->at(c, r));
        std::copy(col.begin(), col.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
    return out;
  }

  PnmImage out{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, kInvalidGray)};
  const int ch = channel == RenderChannel::range ? 3 : 4;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.valid(r, c)) continue;
      const double v = img.channel(r, c, ch);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.valid(r, c)) continue;
      std::uint8_t& px = out.pixels[static_cast<std::size_t>(r) * w + c];
      if (channel == RenderChannel::validity || hi == lo) {
        px = 255;
      } else {
        px = to_byte((img.channel(r, c, ch) - lo) / (hi - lo));
      }
    }
  }
  return out;
}

inline void render_range_image(const RangeImage& img, RenderChannel channel,
                               const std::filesystem::path& path,
                               const LabelGrid* labels = nullptr) {
  write_pnm(path, render_range_image(img, channel, labels));
}

}  // namespace rangefuse
