#pragma once

// File formats: PFM float maps, 8/16-bit PNG, ASCII PLY point clouds, CSV.
// Byte layouts are described in docs/formats.md.

#include <filesystem>
#include <string>
#include <vector>

#include "m3d/fields.hpp"
#include "m3d/geometry.hpp"

namespace m3d {

/// A PFM image: 1 (Pf) or 3 (PF) float channels, top row first in memory.
struct FloatImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> data;
};

void write_pfm(const std::filesystem::path& path, const FloatImage& img);
FloatImage read_pfm(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const ScalarField& f);
/// Single-channel PFM as a field; throws IoError on 3-channel files.
ScalarField read_pfm_field(const std::filesystem::path& path);

/// Depth as PFM with invalid pixels stored as 0.
void write_depth_pfm(const std::filesystem::path& path, const DepthMap& d);
DepthMap read_depth_pfm(const std::filesystem::path& path);

/// Raw PNG samples, row-major, channel-interleaved.
struct PngImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

PngImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngImage& img);

/// Gray/gray+alpha/RGB/RGBA PNGs at 8 or 16 bits, scaled to [0, 1]; alpha is
/// dropped and gray stays single-channel.
ImagePlane read_image(const std::filesystem::path& path);
/// Quantised to 8 bits, round to nearest.
void write_image(const std::filesystem::path& path, const ImagePlane& img);
/// The values write_image would store, read back.
ImagePlane quantize8(const ImagePlane& img);

/// 16-bit gray PNG; depth = count * units_per_count (0.001 for millimetre
/// counts of metre depths); count 0 marks invalid pixels. Writing a depth
/// beyond 65535 counts throws IoError.
DepthMap read_depth_png16(const std::filesystem::path& path, double units_per_count);
void write_depth_png16(const std::filesystem::path& path, const DepthMap& d,
                       double units_per_count);

/// 0/255 single-channel PNG.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& m);
BinaryMask read_mask_png(const std::filesystem::path& path);

void write_ply(const std::filesystem::path& path, const std::vector<Vec3>& points);
std::vector<Vec3> read_ply(const std::filesystem::path& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& cells);
  void add_row(const std::string& label, const std::vector<double>& values);
  [[nodiscard]] std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace m3d
