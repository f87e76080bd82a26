#pragma once

// Rectified stereo datasets on disk. Two normalised layouts are read (see
// README): a per-sequence directory tree (`scared_like`) and flat per-frame
// file triples (`latte_like`). Both carry a `calib.txt` per sequence.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "m3d/fields.hpp"
#include "m3d/objective.hpp"

namespace m3d {

enum class DatasetLayout { scared_like, latte_like };

std::string to_string(DatasetLayout layout);
DatasetLayout dataset_layout_from_string(const std::string& name);

/// `key = value` lines with focal, cx, cy and baseline; width and height are
/// taken from the images.
CameraRig parse_calibration(const std::string& text, int width, int height);
std::string calibration_text(const CameraRig& rig);

struct DatasetSample {
  std::string sequence;
  std::string frame;
  StereoPair images;
  std::optional<DepthMap> gt_depth;
  CameraRig rig;
};

struct SkipReport {
  std::filesystem::path path;
  std::string reason;
};

struct DatasetOptions {
  /// Resize target; 0 x 0 keeps the native resolution.
  int work_height = 0;
  int work_width = 0;
  /// Metres per count of 16-bit depth PNGs.
  double depth_png_units = 0.001;
};

/// Yields samples one at a time in sorted sequence/frame order. Sequences
/// without a readable calibration and frames with unreadable or mismatched
/// files are skipped and reported instead of throwing.
class DatasetReader {
 public:
  DatasetReader(std::filesystem::path root, DatasetLayout layout, DatasetOptions options = {});

  std::optional<DatasetSample> next();
  [[nodiscard]] const std::vector<SkipReport>& skipped() const { return skipped_; }

 private:
  struct Frame {
    std::string name;
    std::filesystem::path left, right, depth;
  };
  struct Sequence {
    std::string name;
    std::filesystem::path dir;
  };

  bool open_next_sequence();
  std::optional<DatasetSample> load(const Frame& f);

  DatasetLayout layout_;
  DatasetOptions options_;
  std::vector<Sequence> sequences_;
  std::size_t next_sequence_ = 0;
  std::string calib_text_;
  std::string current_;
  std::vector<Frame> frames_;
  std::size_t next_frame_ = 0;
  std::vector<SkipReport> skipped_;
};

/// Writes one frame in the given layout, creating `<root>/<sequence>` and its
/// calibration file. Depth goes to PFM (scared_like) or 16-bit PNG
/// (latte_like).
void write_dataset_frame(const std::filesystem::path& root, DatasetLayout layout,
                         const std::string& sequence, const std::string& frame,
                         const StereoPair& images, const CameraRig& rig,
                         const DepthMap* gt_depth, double depth_png_units = 0.001);

/// Bilinear resize with pixel-centre alignment.
ImagePlane resize_image(const ImagePlane& img, int height, int width);
/// Nearest-neighbour resize, so invalid pixels never blend into valid ones.
DepthMap resize_depth(const DepthMap& d, int height, int width);
/// Intrinsics for a resized image; focal scales with the width ratio.
CameraRig scale_rig(const CameraRig& rig, int height, int width);

}  // namespace m3d
