#include "m3d/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "m3d/errors.hpp"
#include "m3d/io.hpp"

namespace m3d {
namespace fs = std::filesystem;
namespace {

constexpr const char* kCalibFile = "calib.txt";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

double source_coord(int j, int dst, int src) {
  const double x = (j + 0.5) * static_cast<double>(src) / dst - 0.5;
  return std::clamp(x, 0.0, static_cast<double>(src - 1));
}

}  // namespace

std::string to_string(DatasetLayout layout) {
  return layout == DatasetLayout::scared_like ? "scared-like" : "latte-like";
}

DatasetLayout dataset_layout_from_string(const std::string& name) {
  if (name == "scared-like") return DatasetLayout::scared_like;
  if (name == "latte-like") return DatasetLayout::latte_like;
  throw InvalidArgument("unknown dataset layout '" + name + "' (scared-like, latte-like)");
}

namespace {

std::map<std::string, double> calibration_values(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("calibration: expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    double v = 0.0;
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec != std::errc() || r.ptr != value.data() + value.size()) {
      throw IoError("calibration: bad number for '" + key + "'");
    }
    kv[key] = v;
  }
  for (const char* k : {"focal", "cx", "cy", "baseline"}) {
    if (!kv.count(k)) throw IoError(std::string("calibration: missing '") + k + "'");
  }
  return kv;
}

}  // namespace

CameraRig parse_calibration(const std::string& text, int width, int height) {
  auto kv = calibration_values(text);
  try {
    return CameraRig(kv["focal"], kv["cx"], kv["cy"], kv["baseline"], width, height);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("calibration: ") + e.what());
  }
}

std::string calibration_text(const CameraRig& rig) {
  return "focal = " + format_double(rig.focal()) + "\ncx = " + format_double(rig.cx()) +
         "\ncy = " + format_double(rig.cy()) + "\nbaseline = " + format_double(rig.baseline()) + "\n";
}

ImagePlane resize_image(const ImagePlane& img, int height, int width) {
  if (height <= 0 || width <= 0) throw InvalidArgument("resize_image: size must be positive");
  if (img.height() == height && img.width() == width) return img;
  const int c = img.channels();
  std::vector<double> out(static_cast<std::size_t>(height) * width * c);
  for (int i = 0; i < height; ++i) {
    const double y = source_coord(i, height, img.height());
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = y - y0;
    for (int j = 0; j < width; ++j) {
      const double x = source_coord(j, width, img.width());
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = x - x0;
      for (int k = 0; k < c; ++k) {
        const double top = img(y0, x0, k) + tx * (img(y0, x1, k) - img(y0, x0, k));
        const double bot = img(y1, x0, k) + tx * (img(y1, x1, k) - img(y1, x0, k));
        out[(static_cast<std::size_t>(i) * width + j) * c + k] = std::clamp(top + ty * (bot - top), 0.0, 1.0);
      }
    }
  }
  return ImagePlane(height, width, c, std::move(out));
}

DepthMap resize_depth(const DepthMap& d, int height, int width) {
  if (height <= 0 || width <= 0) throw InvalidArgument("resize_depth: size must be positive");
  if (d.height() == height && d.width() == width) return d;
  std::vector<double> v(static_cast<std::size_t>(height) * width);
  std::vector<std::uint8_t> ok(v.size());
  for (int i = 0; i < height; ++i) {
    const int si = static_cast<int>(std::lround(source_coord(i, height, d.height())));
    for (int j = 0; j < width; ++j) {
      const int sj = static_cast<int>(std::lround(source_coord(j, width, d.width())));
      const std::size_t k = static_cast<std::size_t>(i) * width + j;
      ok[k] = d.valid(si, sj);
      v[k] = ok[k] ? d(si, sj) : 0.0;
    }
  }
  return DepthMap(height, width, std::move(v), std::move(ok));
}

CameraRig scale_rig(const CameraRig& rig, int height, int width) {
  const double sx = static_cast<double>(width) / rig.width();
  const double sy = static_cast<double>(height) / rig.height();
  return CameraRig(rig.focal() * sx, (rig.cx() + 0.5) * sx - 0.5, (rig.cy() + 0.5) * sy - 0.5,
                   rig.baseline(), width, height);
}

DatasetReader::DatasetReader(fs::path root, DatasetLayout layout, DatasetOptions options)
    : layout_(layout), options_(options) {
  if ((options_.work_height == 0) != (options_.work_width == 0) || options_.work_height < 0 ||
      options_.work_width < 0) {
    throw InvalidArgument("DatasetReader: work size must be both zero or both positive");
  }
  if (!fs::is_directory(root)) throw IoError(root.string() + ": not a directory");
  // The root itself may be a single sequence.
  if (fs::exists(root / kCalibFile)) {
    sequences_.push_back({root.filename().string(), root});
    return;
  }
  for (const auto& p : sorted_entries(root)) {
    if (fs::is_directory(p)) sequences_.push_back({p.filename().string(), p});
  }
}

bool DatasetReader::open_next_sequence() {
  while (next_sequence_ < sequences_.size()) {
    const Sequence& s = sequences_[next_sequence_++];
    try {
      calib_text_ = read_text(s.dir / kCalibFile);
      calibration_values(calib_text_);
    } catch (const std::exception& e) {
      skipped_.push_back({s.dir, std::string("sequence skipped: ") + e.what()});
      continue;
    }
    current_ = s.name;
    frames_.clear();
    next_frame_ = 0;
    if (layout_ == DatasetLayout::scared_like) {
      for (const auto& p : sorted_entries(s.dir / "left")) {
        if (p.extension() != ".png") continue;
        const std::string stem = p.stem().string();
        frames_.push_back({stem, p, s.dir / "right" / (stem + ".png"), s.dir / "depth" / (stem + ".pfm")});
      }
    } else {
      for (const auto& p : sorted_entries(s.dir)) {
        const std::string name = p.filename().string();
        if (!has_suffix(name, "_l.png")) continue;
        const std::string stem = name.substr(0, name.size() - 6);
        frames_.push_back({stem, p, s.dir / (stem + "_r.png"), s.dir / (stem + "_depth.png")});
      }
    }
    return true;
  }
  return false;
}

std::optional<DatasetSample> DatasetReader::load(const Frame& f) {
  try {
    ImagePlane left = read_image(f.left);
    ImagePlane right = read_image(f.right);
    if (left.size() != right.size() || left.channels() != right.channels()) {
      throw IoError("left and right images differ in size or channels");
    }
    std::optional<DepthMap> depth;
    if (fs::exists(f.depth)) {
      depth = layout_ == DatasetLayout::scared_like
                  ? read_depth_pfm(f.depth)
                  : read_depth_png16(f.depth, options_.depth_png_units);
      if (depth->size() != left.size()) throw IoError("depth size differs from the images");
    }
    CameraRig rig = parse_calibration(calib_text_, left.width(), left.height());
    if (options_.work_height > 0 &&
        (options_.work_height != left.height() || options_.work_width != left.width())) {
      const int h = options_.work_height, w = options_.work_width;
      left = resize_image(left, h, w);
      right = resize_image(right, h, w);
      if (depth) depth = resize_depth(*depth, h, w);
      rig = scale_rig(rig, h, w);
    }
    return DatasetSample{current_, f.name, {std::move(left), std::move(right)}, std::move(depth), rig};
  } catch (const IoError& e) {
    skipped_.push_back({f.left, std::string("frame skipped: ") + e.what()});
  } catch (const InvalidArgument& e) {
    skipped_.push_back({f.left, std::string("frame skipped: ") + e.what()});
  }
  return std::nullopt;
}

std::optional<DatasetSample> DatasetReader::next() {
  for (;;) {
    while (next_frame_ < frames_.size()) {
      if (auto s = load(frames_[next_frame_++])) return s;
    }
    if (!open_next_sequence()) return std::nullopt;
  }
}

void write_dataset_frame(const fs::path& root, DatasetLayout layout, const std::string& sequence,
                         const std::string& frame, const StereoPair& images, const CameraRig& rig,
                         const DepthMap* gt_depth, double depth_png_units) {
  const fs::path dir = root / sequence;
  std::error_code ec;
  if (layout == DatasetLayout::scared_like) {
    for (const char* sub : {"left", "right", "depth"}) fs::create_directories(dir / sub, ec);
  } else {
    fs::create_directories(dir, ec);
  }
  if (ec) throw IoError(dir.string() + ": cannot create directory (" + ec.message() + ")");
  write_text(dir / kCalibFile, calibration_text(rig));
  if (layout == DatasetLayout::scared_like) {
    write_image(dir / "left" / (frame + ".png"), images.left);
    write_image(dir / "right" / (frame + ".png"), images.right);
    if (gt_depth) write_depth_pfm(dir / "depth" / (frame + ".pfm"), *gt_depth);
  } else {
    write_image(dir / (frame + "_l.png"), images.left);
    write_image(dir / (frame + "_r.png"), images.right);
    if (gt_depth) write_depth_png16(dir / (frame + "_depth.png"), *gt_depth, depth_png_units);
  }
}

}  // namespace m3d
