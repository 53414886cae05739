// rangefuse command-line tool.
//
// Samples are read either from a directory (cloud.rfpc or cloud.bin,
// calib.txt, image.ppm, optional mask.pgm and labels.bin), from individual
// --cloud/--calib/--rgb files, or generated in memory with --synthetic.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rangefuse/rangefuse.hpp"

namespace fs = std::filesystem;
using namespace rangefuse;

namespace {

// ---------------------------------------------------------------- options

struct Options {
  int width = 512;
  int beams = 64;
  double fov_deg = 90.0;
  std::size_t controls = 48;
  double lambda = 0.0;
  std::string seed_policy = "center";
  std::string mode = "beam";
  double zenith_min_deg = -24.9;
  double zenith_max_deg = 2.0;
  std::string out = ".";

  // Sample source.
  std::vector<std::string> samples;
  std::string synthetic;
  std::string cloud, calib, rgb, mask, labels;

  // Per-command.
  std::string range_file;
  int jobs = 1;
  std::string plan = "three_level";
  int rgb_channels = 16;
  int range_channels = 8;
  std::string pred, gt;
  int classes = 4;
  std::string remap;
  std::string counts = "4,24,48,96,192,384";
  int repetitions = 5;
  std::string channel = "range";
  std::string scene = "street";
};

// Options whose presence means the user chose the grid explicitly.
struct GridFlags {
  std::vector<CLI::Option*> opts;
  bool given() const {
    return std::any_of(opts.begin(), opts.end(), [](const CLI::Option* o) { return o->count() > 0; });
  }
};

GridConfig grid_from(const Options& o) {
  const double half = 0.5 * o.fov_deg * std::numbers::pi / 180.0;
  GridConfig g{o.width, o.beams, -half, half};
  g.validate();
  return g;
}

RowMode row_mode_from(const Options& o) {
  if (o.mode == "beam") return BeamRows{};
  const double lo = o.zenith_min_deg * std::numbers::pi / 180.0;
  const double hi = o.zenith_max_deg * std::numbers::pi / 180.0;
  if (!(hi > lo)) throw ParameterError("zenith-max-deg must exceed zenith-min-deg");
  return SphericalRows{(hi - lo) / o.beams, lo};
}

SeedPolicy seed_from(const Options& o) {
  return o.seed_policy == "index0" ? SeedPolicy::index0 : SeedPolicy::center;
}

std::string text(double v) {
  char buf[32];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

std::vector<std::size_t> parse_counts(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size()) {
      throw ParameterError("bad control count '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError("no control counts given");
  return out;
}

// "2:1,4:3" -> {2->1, 4->3}
std::map<int, int> parse_remap(const std::string& s) {
  std::map<int, int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    int from = 0, to = 0;
    const bool ok =
        colon != std::string::npos &&
        std::from_chars(item.data(), item.data() + colon, from).ptr == item.data() + colon &&
        std::from_chars(item.data() + colon + 1, item.data() + item.size(), to).ptr ==
            item.data() + item.size();
    if (!ok) throw ParameterError("bad remap entry '" + item + "', expected FROM:TO");
    out[from] = to;
  }
  return out;
}

// ---------------------------------------------------------------- samples

struct Sample {
  std::string name;
  PointCloud cloud;
  CalibrationSet calib;
  FeatureGrid rgb;
  std::optional<LabelGrid> mask;
  std::optional<std::vector<std::uint32_t>> labels;
  std::optional<GridConfig> grid;  // preferred grid when the flags do not set one
};

struct SyntheticSetup {
  SceneDescription scene;
  VirtualRig rig;
  GridConfig grid;
};

SyntheticSetup synthetic_setup(const std::string& name) {
  if (name == "street") return {street_scene(), kitti_like_rig(), GridConfig{}};
  if (name == "fronto") {
    const CoincidentRig c = coincident_rig(64, 16, 512.0);
    return {fronto_parallel_scene(), c.rig, grid_config(c)};
  }
  throw ParameterError("unknown synthetic scene '" + name + "' (street, fronto)");
}

Sample synthetic_sample(const std::string& name) {
  const SyntheticSetup s = synthetic_setup(name);
  LabeledScene scene = generate_synthetic_scene(s.scene, s.rig);
  return {name, std::move(scene.cloud), scene.calib, std::move(scene.rgb), std::move(scene.rgb_labels),
          std::move(scene.per_point_class), s.grid};
}

PointCloud load_cloud_file(const fs::path& path, int beams) {
  if (path.extension() == ".rfpc") return load_native_cloud(path);
  BeamReconstruction rec = reconstruct_beam_ids(load_kitti_velodyne(path), static_cast<std::uint32_t>(beams));
  for (const auto& w : rec.warnings) std::cerr << "warning: " << path.string() << ": " << w << '\n';
  return std::move(rec.cloud);
}

fs::path pick(const std::string& override_path, const fs::path& dir, const char* name) {
  if (!override_path.empty()) return override_path;
  return dir.empty() ? fs::path() : dir / name;
}

Sample file_sample(const Options& o, const fs::path& dir) {
  Sample s;
  s.name = dir.empty() ? fs::path(o.cloud).stem().string() : dir.filename().string();
  fs::path cloud = pick(o.cloud, dir, "cloud.rfpc");
  if (o.cloud.empty() && !fs::exists(cloud)) cloud = dir / "cloud.bin";
  const fs::path calib = pick(o.calib, dir, "calib.txt");
  const fs::path rgb = pick(o.rgb, dir, "image.ppm");
  if (cloud.empty() || calib.empty() || rgb.empty()) {
    throw ParameterError("a sample needs --sample DIR, --synthetic NAME, or --cloud, --calib and --rgb");
  }
  s.cloud = load_cloud_file(cloud, o.beams);
  s.calib = load_kitti_calibration(calib);
  s.rgb = grid_from_pnm(read_pnm(rgb));
  const fs::path mask = pick(o.mask, dir, "mask.pgm");
  if (!mask.empty() && fs::exists(mask)) s.mask = labels_from_pgm(read_pnm(mask));
  const bool label_mask = o.labels.ends_with(".pgm");  // range-image labels, used by render
  const fs::path labels = pick(label_mask ? std::string() : o.labels, dir, "labels.bin");
  if (!labels.empty() && fs::exists(labels)) {
    s.labels = load_labels(labels);
    if (s.labels->size() != s.cloud.size()) {
      throw ShapeError("'" + labels.string() + "' has " + std::to_string(s.labels->size()) +
                       " labels for " + std::to_string(s.cloud.size()) + " points");
    }
  }
  return s;
}

std::vector<Sample> load_samples(const Options& o) {
  std::vector<Sample> out;
  if (!o.synthetic.empty()) out.push_back(synthetic_sample(o.synthetic));
  for (const auto& d : o.samples) out.push_back(file_sample(o, d));
  if (out.empty()) out.push_back(file_sample(o, {}));
  return out;
}

Sample load_one(const Options& o) {
  auto all = load_samples(o);
  if (all.size() != 1) throw ParameterError("this command takes exactly one sample");
  return std::move(all.front());
}

GridConfig effective_grid(const Options& o, const GridFlags& flags, const Sample& s) {
  if (!flags.given() && s.grid) return *s.grid;
  return grid_from(o);
}

// ---------------------------------------------------------------- output

fs::path out_dir(const Options& o) {
  fs::create_directories(o.out);
  return o.out;
}

void write_text(const fs::path& path, const std::string& content) {
  detail::write_file_atomic(path, content);
}

FusionPlan plan_from(const Options& o) {
  FusionPlan plan;
  if (o.plan == "three_level") {
    plan = FusionPlan::three_level(o.controls, o.lambda);
  } else if (o.plan == "full") {
    plan = FusionPlan{{{1, 1, "full"}}, o.controls, o.lambda};
  } else {
    throw ParameterError("unknown plan '" + o.plan + "' (three_level, full)");
  }
  return plan;
}

StubExtractor stub_for(const std::vector<double>& strides, int channels) {
  std::set<int> unique;
  for (double s : strides) unique.insert(static_cast<int>(s));
  std::vector<FeatureLevel> levels;
  for (int s : unique) levels.push_back({s, channels});
  return make_stub_extractor(levels);
}

CorrespondenceSet sample_correspondences(const Options& o, const GridFlags& flags, const Sample& s,
                                         RangeImage* img_out = nullptr) {
  RangeImage img = build_range_image(s.cloud, effective_grid(o, flags, s), row_mode_from(o));
  CorrespondenceSet corr = build_correspondences(img, s.calib, s.rgb.size());
  if (img_out) *img_out = std::move(img);
  return corr;
}

SplineWarp fit_controls(const Options& o, const CorrespondenceSet& corr) {
  if (corr.size() < 3) {
    throw DegenerateGeometryError("only " + std::to_string(corr.size()) + " correspondences");
  }
  const std::size_t k = std::min(o.controls, corr.size());
  const auto idx = farthest_point_sample(corr.range_points(), k, select_seed(corr, seed_from(o)));
  return fit_spline(corr.subset(idx), o.lambda);
}

// ---------------------------------------------------------------- commands

int cmd_range_image(const Options& o, const GridFlags& flags) {
  const Sample s = load_one(o);
  const RangeImage img = build_range_image(s.cloud, effective_grid(o, flags, s), row_mode_from(o));
  write_range_image(out_dir(o) / "range.rfri", img);
  std::cout << "points=" << s.cloud.size() << "\nvalid=" << img.valid_count() << "\nwidth="
            << img.width() << "\nheight=" << img.height() << '\n';
  return 0;
}

int cmd_correspond(const Options& o, const GridFlags& flags) {
  const Sample s = load_one(o);
  const CorrespondenceSet corr = sample_correspondences(o, flags, s);
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : corr.items) {
    os << c.range_px.x() << ' ' << c.range_px.y() << ' ' << c.rgb_px.x() << ' ' << c.rgb_px.y() << '\n';
  }
  write_text(out_dir(o) / "correspondences.txt", os.str());
  std::cout << "correspondences=" << corr.size() << '\n';
  return 0;
}

int cmd_warp(const Options& o, const GridFlags& flags) {
  const Sample s = load_one(o);
  const SplineWarp warp = fit_controls(o, sample_correspondences(o, flags, s));
  std::ostringstream os;
  dump_spline(os, warp);
  write_text(out_dir(o) / "warp.txt", os.str());
  std::cout << "controls=" << warp.size() << "\nfit_residual=" << text(warp.fit_residual)
            << "\ncondition=" << text(warp.condition_estimate) << '\n';
  return 0;
}

struct PipelineReport {
  std::string name;
  std::string summary;
  std::string error;
};

PipelineReport run_pipeline_sample(const Options& o, const GridFlags& flags, const Sample& s,
                                   const fs::path& dir) {
  PipelineReport rep{s.name, {}, {}};
  try {
    const FusionPlan plan = plan_from(o);
    std::vector<double> rgb_strides, range_strides;
    for (const auto& p : plan.layer_pairs) {
      rgb_strides.push_back(p.rgb_stride);
      range_strides.push_back(p.range_stride);
    }
    const PipelineResult r = run_fusion_pipeline(
        s.cloud, s.rgb, s.calib, plan, stub_for(rgb_strides, o.rgb_channels),
        stub_for(range_strides, o.range_channels),
        PipelineOptions{effective_grid(o, flags, s), row_mode_from(o), seed_from(o)});
    std::ostringstream sum;
    sum << "points=" << s.cloud.size() << "\nvalid=" << r.range_image.valid_count()
        << "\ncorrespondences=" << r.correspondences.size() << "\ncontrols=" << r.control_indices.size()
        << "\nfit_count=" << r.fit_count << '\n';
    if (r.warp) sum << "fit_residual=" << text(r.warp->fit_residual) << '\n';
    for (std::size_t i = 0; i < r.fused.size(); ++i) {
      sum << "layer." << plan.layer_pairs[i].label << '=' << r.fused[i].shape_string() << '\n';
    }
    rep.summary = sum.str();
    fs::create_directories(dir);
    write_text(dir / "summary.txt", rep.summary);
    write_text(dir / "timings.txt", format_timings(r.timings));
    if (r.warp) {
      std::ostringstream w;
      dump_spline(w, *r.warp);
      write_text(dir / "warp.txt", w.str());
    }
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  return rep;
}

int cmd_pipeline(const Options& o, const GridFlags& flags) {
  if (o.jobs < 1) throw ParameterError("--jobs must be >= 1");
  const std::vector<Sample> samples = load_samples(o);
  const fs::path root = out_dir(o);
  std::vector<fs::path> dirs;
  std::set<std::string> names;
  for (const auto& s : samples) {
    std::string name = s.name;
    for (int n = 2; !names.insert(name).second; ++n) name = s.name + "_" + std::to_string(n);
    dirs.push_back(samples.size() == 1 ? root : root / name);
  }

  std::vector<PipelineReport> reports(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < samples.size();) {
      reports[i] = run_pipeline_sample(o, flags, samples[i], dirs[i]);
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(o.jobs), samples.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int failed = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].error.empty()) {
      ++failed;
      std::cerr << "error: sample '" << reports[i].name << "': " << reports[i].error << '\n';
      continue;
    }
    if (reports.size() > 1) std::cout << "[" << dirs[i].filename().string() << "]\n";
    std::cout << reports[i].summary;
  }
  return failed == 0 ? 0 : 1;
}

int cmd_eval(const Options& o) {
  if (o.pred.empty() || o.gt.empty()) throw ParameterError("eval needs --pred and --gt label masks");
  const LabelGrid pred = labels_from_pgm(read_pnm(o.pred));
  const LabelGrid gt = labels_from_pgm(read_pnm(o.gt));
  std::vector<std::uint8_t> mask;
  if (!o.mask.empty()) {
    const PnmImage m = read_pnm(o.mask);
    if (m.channels != 1) throw FormatError("evaluation mask must be a PGM");
    for (auto v : m.pixels) mask.push_back(v != 0);
  } else {
    mask = labeled_mask(pred, gt);
  }
  const IoUReport rep = compute_iou(pred, gt, mask, o.classes);
  write_text(out_dir(o) / "iou.txt", format_iou_key_values(rep));
  std::cout << format_iou_report(rep);
  return 0;
}

int cmd_baseline(const Options& o, const GridFlags& flags) {
  const Sample s = load_one(o);
  if (!s.mask) throw PreconditionError("baseline needs an RGB class mask (mask.pgm or --mask)");
  const RangeImage img = build_range_image(s.cloud, effective_grid(o, flags, s), row_mode_from(o));
  const LabelGrid pred = rgb_mask_lookup_baseline(*s.mask, img, s.calib, parse_remap(o.remap));
  const fs::path dir = out_dir(o);
  write_pnm(dir / "baseline.pgm", pgm_from_labels(pred));
  if (!s.labels) {
    std::size_t labeled = 0;
    for (auto l : pred.labels) labeled += l != LabelGrid::kNoClass;
    std::cout << "labeled=" << labeled << '\n';
    return 0;
  }
  const LabelGrid gt = range_labels_from_points(img, *s.labels);
  write_pnm(dir / "gt.pgm", pgm_from_labels(gt));
  const IoUReport rep = compute_iou(pred, gt, labeled_mask(pred, gt), o.classes);
  write_text(dir / "iou.txt", format_iou_key_values(rep));
  std::cout << format_iou_report(rep);
  return 0;
}

int cmd_bench(const Options& o, const GridFlags& flags) {
  const Sample s = load_one(o);
  const CorrespondenceSet corr = sample_correspondences(o, flags, s);
  BenchOptions bo;
  bo.rgb_channels = o.rgb_channels;
  bo.lambda = o.lambda;
  bo.seed_policy = seed_from(o);
  const auto rows = benchmark_control_points(corr, parse_counts(o.counts), o.repetitions, bo);
  const std::string table = format_bench_table(rows);
  write_text(out_dir(o) / "bench.txt", table);
  std::cout << table;
  return 0;
}

int cmd_render(const Options& o, const GridFlags& flags) {
  static const std::map<std::string, RenderChannel> channels{
      {"range", RenderChannel::range},
      {"intensity", RenderChannel::intensity},
      {"validity", RenderChannel::validity},
      {"class-overlay", RenderChannel::class_overlay}};
  const RenderChannel ch = channels.at(o.channel);
  RangeImage img;
  std::optional<LabelGrid> labels;
  if (!o.range_file.empty()) {
    img = read_range_image(o.range_file);
  } else {
    const Sample s = load_one(o);
    img = build_range_image(s.cloud, effective_grid(o, flags, s), row_mode_from(o));
    if (s.labels) labels = range_labels_from_points(img, *s.labels);
  }
  if (!o.labels.empty() && o.labels.ends_with(".pgm")) labels = labels_from_pgm(read_pnm(o.labels));
  if (ch == RenderChannel::class_overlay && !labels) {
    throw PreconditionError("class-overlay needs per-point labels or a range-image label PGM (--labels)");
  }
  const fs::path path =
      out_dir(o) / ("render_" + o.channel + (ch == RenderChannel::class_overlay ? ".ppm" : ".pgm"));
  render_range_image(img, ch, path, labels ? &*labels : nullptr);
  std::cout << "wrote=" << path.string() << '\n';
  return 0;
}

int cmd_synth(const Options& o) {
  const SyntheticSetup setup = synthetic_setup(o.scene);
  const LabeledScene scene = generate_synthetic_scene(setup.scene, setup.rig);
  const fs::path dir = out_dir(o);
  write_native_cloud(dir / "cloud.rfpc", scene.cloud);
  write_kitti_velodyne(dir / "cloud.bin", scene.cloud);
  write_labels(dir / "labels.bin", scene.per_point_class);
  write_kitti_calibration(dir / "calib.txt", scene.calib);
  write_pnm(dir / "image.ppm", pnm_from_grid(scene.rgb));
  write_pnm(dir / "mask.pgm", pgm_from_labels(scene.rgb_labels));
  const GridConfig& g = setup.grid;
  const double fov = (g.azimuth_max - g.azimuth_min) * 180.0 / std::numbers::pi;
  write_text(dir / "sample.cfg", "width=" + std::to_string(g.width) + "\nbeams=" +
                                     std::to_string(g.num_beams) + "\nfov-deg=" + text(fov) + '\n');
  std::cout << "points=" << scene.cloud.size() << "\nimage=" << scene.rgb.width() << 'x'
            << scene.rgb.height() << '\n';
  return 0;
}

// ---------------------------------------------------------------- config

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat "key = value" lines; '#' starts a comment. Each entry becomes
// "--key=value".
std::vector<std::string> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::vector<std::string> args;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(n) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    if (key.empty() || key == "config") {
      throw FormatError("'" + path.string() + "' line " + std::to_string(n) + ": bad key");
    }
    args.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

// Removes every --config occurrence and splices the file entries right after
// the subcommand, ahead of the user's own flags. Since options keep their
// last value, command-line flags override the file.
std::vector<std::string> expand_config(std::vector<std::string> args,
                                       const std::set<std::string>& subcommands) {
  std::vector<std::string> config_paths;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ParameterError("--config needs a path");
      config_paths.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_paths.push_back(args[i].substr(9));
    } else {
      kept.push_back(args[i]);
    }
  }
  if (config_paths.empty()) return kept;
  std::vector<std::string> injected;
  for (const auto& p : config_paths) {
    auto entries = read_config(p);
    injected.insert(injected.end(), entries.begin(), entries.end());
  }
  auto at = std::find_if(kept.begin(), kept.end(),
                         [&](const std::string& a) { return subcommands.count(a) > 0; });
  at = at == kept.end() ? kept.end() : at + 1;
  kept.insert(at, injected.begin(), injected.end());
  return kept;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR range images and spline-based RGB feature warping"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Options o;
  std::string config_path;  // consumed by expand_config; declared for --help

  auto add_grid = [&](CLI::App* sub, GridFlags& flags) {
    flags.opts.push_back(sub->add_option("--width", o.width, "Range image columns")->capture_default_str());
    flags.opts.push_back(sub->add_option("--beams", o.beams, "Range image rows / beam count")->capture_default_str());
    flags.opts.push_back(sub->add_option("--fov-deg", o.fov_deg, "Horizontal field of view, centered")
                             ->capture_default_str());
    sub->add_option("--mode", o.mode, "Row assignment")
        ->check(CLI::IsMember({"beam", "spherical"}))
        ->capture_default_str();
    sub->add_option("--zenith-min-deg", o.zenith_min_deg, "Lowest zenith angle (spherical mode)")
        ->capture_default_str();
    sub->add_option("--zenith-max-deg", o.zenith_max_deg, "Highest zenith angle (spherical mode)")
        ->capture_default_str();
  };
  auto add_fit = [&](CLI::App* sub) {
    sub->add_option("--controls", o.controls, "Control points K")->capture_default_str();
    sub->add_option("--lambda", o.lambda, "Spline regularization")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    sub->add_option("--seed-policy", o.seed_policy, "FPS seed")
        ->check(CLI::IsMember({"center", "index0"}))
        ->capture_default_str();
  };
  auto add_source = [&](CLI::App* sub, bool many) {
    auto* opt = sub->add_option("--sample", o.samples, "Sample directory");
    if (many) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sub->add_option("--synthetic", o.synthetic, "Generated scene: street or fronto");
    sub->add_option("--cloud", o.cloud, "Point cloud (.bin KITTI or .rfpc with beam ids)");
    sub->add_option("--calib", o.calib, "KITTI calibration text");
    sub->add_option("--rgb", o.rgb, "RGB image (PPM)");
    sub->add_option("--mask", o.mask, "RGB class mask (PGM)");
    sub->add_option("--labels", o.labels, "Per-point labels (.bin) or range label mask (.pgm)");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--config", config_path, "Flat key=value file; flags on the command line win");
  };

  std::map<std::string, GridFlags> flags;
  auto make = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    return sub;
  };

  auto* range_image = make("range-image", "Build and store a range image");
  add_source(range_image, false);
  add_grid(range_image, flags["range-image"]);

  auto* correspond = make("correspond", "Write range/RGB correspondences as 'rcol rrow u v' lines");
  add_source(correspond, false);
  add_grid(correspond, flags["correspond"]);

  auto* warp = make("warp", "Fit the spline on FPS control points and dump it");
  add_source(warp, false);
  add_grid(warp, flags["warp"]);
  add_fit(warp);

  auto* pipeline = make("pipeline", "Run the fusion pipeline with stub feature extractors");
  add_source(pipeline, true);
  add_grid(pipeline, flags["pipeline"]);
  add_fit(pipeline);
  pipeline->add_option("--jobs", o.jobs, "Samples processed concurrently")->capture_default_str();
  pipeline->add_option("--plan", o.plan, "Layer plan")
      ->check(CLI::IsMember({"three_level", "full"}))
      ->capture_default_str();
  pipeline->add_option("--rgb-channels", o.rgb_channels, "Stub RGB feature channels")->capture_default_str();
  pipeline->add_option("--range-channels", o.range_channels, "Stub range feature channels")
      ->capture_default_str();

  auto* eval = make("eval", "Per-class IoU between two label masks");
  eval->add_option("--pred", o.pred, "Predicted labels (PGM)")->required();
  eval->add_option("--gt", o.gt, "Ground-truth labels (PGM)")->required();
  eval->add_option("--mask", o.mask, "Evaluation mask (PGM, nonzero = evaluate)");
  eval->add_option("--classes", o.classes, "Number of classes")->capture_default_str();

  auto* baseline = make("baseline", "Label range pixels by looking up the RGB class mask");
  add_source(baseline, false);
  add_grid(baseline, flags["baseline"]);
  baseline->add_option("--remap", o.remap, "Class remap, e.g. 2:1,4:3");
  baseline->add_option("--classes", o.classes, "Number of classes")->capture_default_str();

  auto* bench = make("bench", "Median fit+warp time per control-point count");
  add_source(bench, false);
  add_grid(bench, flags["bench"]);
  add_fit(bench);
  bench->add_option("--counts", o.counts, "Comma-separated control counts")->capture_default_str();
  bench->add_option("--repetitions", o.repetitions, "Timed runs per count")->capture_default_str();
  bench->add_option("--rgb-channels", o.rgb_channels, "RGB feature channels")->capture_default_str();

  auto* render = make("render", "Render a range image channel as PGM/PPM");
  add_source(render, false);
  add_grid(render, flags["render"]);
  render->add_option("--range", o.range_file, "Stored range image (.rfri)");
  render->add_option("--channel", o.channel, "Channel")
      ->check(CLI::IsMember({"range", "intensity", "validity", "class-overlay"}))
      ->capture_default_str();

  auto* synth = make("synth", "Write a synthetic sample directory");
  synth->add_option("--scene", o.scene, "street or fronto")
      ->check(CLI::IsMember({"street", "fronto"}))
      ->capture_default_str();

  std::set<std::string> names;
  for (const CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    names.insert(sub->get_name());
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args), names);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*range_image) return cmd_range_image(o, flags["range-image"]);
    if (*correspond) return cmd_correspond(o, flags["correspond"]);
    if (*warp) return cmd_warp(o, flags["warp"]);
    if (*pipeline) return cmd_pipeline(o, flags["pipeline"]);
    if (*eval) return cmd_eval(o);
    if (*baseline) return cmd_baseline(o, flags["baseline"]);
    if (*bench) return cmd_bench(o, flags["bench"]);
    if (*render) return cmd_render(o, flags["render"]);
    if (*synth) return cmd_synth(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
