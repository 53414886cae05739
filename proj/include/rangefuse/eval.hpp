#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rangefuse/calibration.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/projection.hpp"
#include "rangefuse/range_image.hpp"
#include "rangefuse/synthetic.hpp"

namespace rangefuse {

// Rows are ground truth, columns prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t ignore_count = 0;

  explicit ConfusionMatrix(int n = 0)
      : num_classes(n), counts(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {}

  std::uint64_t& at(int gt, int pred) {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::uint64_t at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

struct IoUReport {
  ConfusionMatrix confusion;
  std::vector<std::optional<double>> per_class;  // nullopt: class absent (TP+FP+FN = 0)
  std::optional<double> mean_over_foreground;    // classes >= 1 that are present
};

inline IoUReport iou_from_confusion(const ConfusionMatrix& cm) {
  IoUReport rep{cm, std::vector<std::optional<double>>(static_cast<std::size_t>(cm.num_classes)),
                std::nullopt};
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < cm.num_classes; ++c) {
    const std::uint64_t tp = cm.at(c, c);
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    for (int o = 0; o < cm.num_classes; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    rep.per_class[static_cast<std::size_t>(c)] = iou;
    if (c >= 1) {
      sum += iou;
      ++present;
    }
  }
  if (present > 0) rep.mean_over_foreground = sum / present;
  return rep;
}

// Per-class TP / (TP + FP + FN) over pixels with mask set. Masked-in pixels
// must carry labels in [0, num_classes).
inline IoUReport compute_iou(const LabelGrid& pred, const LabelGrid& gt,
                             const std::vector<std::uint8_t>& mask, int num_classes) {
  if (pred.width != gt.width || pred.height != gt.height ||
      mask.size() != gt.labels.size()) {
    std::ostringstream os;
    os << "IoU shape mismatch: pred " << pred.width << "x" << pred.height << ", gt " << gt.width
       << "x" << gt.height << ", mask of " << mask.size() << " pixels";
    throw ShapeError(os.str());
  }
  if (num_classes < 1) throw ParameterError("num_classes must be >= 1");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (!mask[i]) {
      ++cm.ignore_count;
      continue;
    }
    const auto g = gt.labels[i];
    const auto p = pred.labels[i];
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) {
      throw ParameterError("label out of range at pixel " + std::to_string(i) + " (gt " +
                           std::to_string(g) + ", pred " + std::to_string(p) + ")");
    }
    ++cm.at(g, p);
  }
  return iou_from_confusion(cm);
}

// Mask selecting pixels where both grids carry a class.
inline std::vector<std::uint8_t> labeled_mask(const LabelGrid& a, const LabelGrid& b) {
  std::vector<std::uint8_t> m(a.labels.size(), 0);
  for (std::size_t i = 0; i < m.size() && i < b.labels.size(); ++i) {
    m[i] = a.labels[i] != LabelGrid::kNoClass && b.labels[i] != LabelGrid::kNoClass;
  }
  return m;
}

inline std::string class_name(const std::vector<std::string>& names, int id) {
  if (id >= 0 && static_cast<std::size_t>(id) < names.size()) return names[static_cast<std::size_t>(id)];
  return "class" + std::to_string(id);
}

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names{"background", "car", "pedestrian", "cyclist"};
  return names;
}

// "class <id> <name> iou=<value>" lines then "mean=<value>"; absent values
// are printed as "absent".
inline std::string format_iou_report(const IoUReport& rep,
                                     const std::vector<std::string>& names = default_class_names()) {
  std::ostringstream os;
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    os << "class " << c << ' ' << class_name(names, static_cast<int>(c)) << " iou=";
    if (rep.per_class[c]) os << *rep.per_class[c]; else os << "absent";
    os << '\n';
  }
  os << "mean=";
  if (rep.mean_over_foreground) os << *rep.mean_over_foreground; else os << "absent";
  os << '\n';
  return os.str();
}

namespace detail {

// Shortest decimal text that parses back to the same double.
inline std::string round_trip_text(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string format_iou_key_values(const IoUReport& rep) {
  std::ostringstream os;
  auto value = [&os](const std::optional<double>& v) {
    os << (v ? detail::round_trip_text(*v) : std::string("absent")) << '\n';
  };
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    os << "iou." << c << '=';
    value(rep.per_class[c]);
  }
  os << "mean=";
  value(rep.mean_over_foreground);
  os << "evaluated=" << rep.confusion.total() << '\n'
     << "ignored=" << rep.confusion.ignore_count << '\n';
  return os.str();
}

// Labels each valid range pixel with the class of the nearest RGB mask pixel
// its point projects to, after applying `remap`. Pixels without a projection
// inside the mask, and invalid pixels, get kNoClass.
inline LabelGrid rgb_mask_lookup_baseline(const LabelGrid& mask_rgb, const RangeImage& img,
                                          const CalibrationSet& calib,
                                          const std::map<int, int>& remap = {}) {
  LabelGrid out(img.width(), img.height(), LabelGrid::kNoClass);
  const Matrix34& P = calib.composed_projection();
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (!img.valid(r, c)) continue;
      const auto uv = try_project_point(P, to_vector(img.point(r, c)));
      if (!uv || !inside_image(*uv, mask_rgb.size())) continue;
      const int u = static_cast<int>(std::lround(uv->x()));
      const int v = static_cast<int>(std::lround(uv->y()));
      int cls = mask_rgb.at(u, v);
      if (auto it = remap.find(cls); it != remap.end()) cls = it->second;
      out.at(c, r) = cls;
    }
  }
  return out;
}

// Ground-truth range labels from per-point classes via the range image's
// source indices.
inline LabelGrid range_labels_from_points(const RangeImage& img,
                                          const std::vector<std::uint32_t>& per_point_class) {
  LabelGrid out(img.width(), img.height(), LabelGrid::kNoClass);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      const auto src = img.source_index(r, c);
      if (!src) continue;
      out.at(c, r) = static_cast<std::int32_t>(per_point_class.at(*src));
    }
  }
  return out;
}

}  // namespace rangefuse
