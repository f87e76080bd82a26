#include "m3d/fields.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "m3d/errors.hpp"

namespace m3d {
namespace {

void require_positive_dims(int height, int width, const char* what) {
  if (height < 1 || width < 1) {
    std::ostringstream os;
    os << what << ": dimensions must be positive, got " << height << "x" << width;
    throw InvalidArgument(os.str());
  }
}

void require_length(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    std::ostringstream os;
    os << what << ": expected " << expected << " values, got " << got;
    throw InvalidArgument(os.str());
  }
}

}  // namespace

void require_same_size(Size2 a, Size2 b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch " << a.height << "x" << a.width << " vs "
       << b.height << "x" << b.width;
    throw InvalidArgument(os.str());
  }
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(int height, int width, double fill)
    : height_(height), width_(width) {
  require_positive_dims(height, width, "ScalarField");
  values_.assign(size().area(), fill);
}

ScalarField::ScalarField(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  require_positive_dims(height, width, "ScalarField");
  require_length(values_.size(), size().area(), "ScalarField");
}

double ScalarField::norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

ImagePlane::ImagePlane(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require_positive_dims(height, width, "ImagePlane");
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("ImagePlane: channels must be 1 or 3");
  }
  require_length(data_.size(), size().area() * channels, "ImagePlane");
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidArgument("ImagePlane: intensity outside [0, 1]");
    }
  }
}

ImagePlane ImagePlane::filled(int height, int width, int channels, double value) {
  require_positive_dims(height, width, "ImagePlane");
  return ImagePlane(height, width, channels,
                    std::vector<double>(Size2{height, width}.area() * channels, value));
}

// ---------------------------------------------------------------------------

DisparityField::DisparityField(int height, int width, std::vector<double> values,
                               double ceiling)
    : height_(height), width_(width), ceiling_(ceiling), values_(std::move(values)) {
  require_positive_dims(height, width, "DisparityField");
  require_length(values_.size(), size().area(), "DisparityField");
  if (!(ceiling > 0.0)) throw InvalidArgument("DisparityField: ceiling must be positive");
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > ceiling_) {
      std::ostringstream os;
      os << "DisparityField: value " << v << " outside [0, " << ceiling_ << "]";
      throw InvalidArgument(os.str());
    }
  }
}

DisparityField DisparityField::constant(int height, int width, double value) {
  require_positive_dims(height, width, "DisparityField");
  return DisparityField(height, width,
                        std::vector<double>(Size2{height, width}.area(), value));
}

// ---------------------------------------------------------------------------

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  require_positive_dims(height, width, "BinaryMask");
  require_length(bits_.size(), size().area(), "BinaryMask");
  for (auto b : bits_) {
    if (b > 1) throw InvalidArgument("BinaryMask: values must be 0 or 1");
  }
}

BinaryMask BinaryMask::ones(int height, int width) {
  require_positive_dims(height, width, "BinaryMask");
  return BinaryMask(height, width, std::vector<std::uint8_t>(Size2{height, width}.area(), 1));
}

BinaryMask BinaryMask::zeros(int height, int width) {
  require_positive_dims(height, width, "BinaryMask");
  return BinaryMask(height, width, std::vector<std::uint8_t>(Size2{height, width}.area(), 0));
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
  require_same_size(size(), other.size(), "BinaryMask::operator&");
  std::vector<std::uint8_t> out(bits_.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = bits_[k] & other.bits_[k];
  return BinaryMask(height_, width_, std::move(out));
}

// ---------------------------------------------------------------------------

DepthMap::DepthMap(int height, int width, std::vector<double> values,
                   std::vector<std::uint8_t> valid)
    : height_(height), width_(width), values_(std::move(values)), valid_(std::move(valid)) {
  require_positive_dims(height, width, "DepthMap");
  require_length(values_.size(), size().area(), "DepthMap");
  require_length(valid_.size(), size().area(), "DepthMap validity");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (valid_[k] > 1) throw InvalidArgument("DepthMap: validity must be 0 or 1");
    if (valid_[k] && !(std::isfinite(values_[k]) && values_[k] > 0.0)) {
      throw InvalidArgument("DepthMap: valid depth must be finite and positive");
    }
    if (!valid_[k]) values_[k] = 0.0;
  }
}

DepthMap DepthMap::from_values(int height, int width, std::vector<double> values) {
  std::vector<std::uint8_t> valid(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    valid[k] = std::isfinite(values[k]) && values[k] > 0.0;
  }
  return DepthMap(height, width, std::move(values), std::move(valid));
}

BinaryMask DepthMap::validity() const { return BinaryMask(height_, width_, valid_); }

// ---------------------------------------------------------------------------

PixelGrid make_meshgrid(int height, int width) {
  require_positive_dims(height, width, "make_meshgrid");
  PixelGrid grid{ScalarField(height, width), ScalarField(height, width)};
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      grid.x_coords(i, j) = j;
      grid.y_coords(i, j) = i;
    }
  }
  return grid;
}

CameraRig::CameraRig(double focal, double cx, double cy, double baseline, int width,
                     int height)
    : focal_(focal), cx_(cx), cy_(cy), baseline_(baseline), width_(width), height_(height) {
  require_positive_dims(height, width, "CameraRig");
  if (!(std::isfinite(focal) && focal > 0.0)) throw InvalidArgument("CameraRig: focal must be > 0");
  if (!(std::isfinite(baseline) && baseline > 0.0)) {
    throw InvalidArgument("CameraRig: baseline must be > 0");
  }
  if (!(cx >= 0.0 && cx <= width - 1 && cy >= 0.0 && cy <= height - 1)) {
    throw InvalidArgument("CameraRig: principal point outside the image");
  }
}

DepthMap disparity_to_depth(const DisparityField& d, const CameraRig& rig) {
  require_same_size(d.size(), rig.size(), "disparity_to_depth");
  const auto n = d.size().area();
  std::vector<double> depth(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  const auto values = d.values();
  for (std::size_t k = 0; k < n; ++k) {
    if (values[k] >= kMinDisparity) {
      depth[k] = rig.bf() / values[k];
      valid[k] = 1;
    }
  }
  return DepthMap(d.height(), d.width(), std::move(depth), std::move(valid));
}

DisparityConversion depth_to_disparity(const DepthMap& depth, const CameraRig& rig) {
  require_same_size(depth.size(), rig.size(), "depth_to_disparity");
  const auto n = depth.size().area();
  std::vector<double> disp(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  const auto values = depth.values();
  for (int i = 0; i < depth.height(); ++i) {
    for (int j = 0; j < depth.width(); ++j) {
      const auto k = static_cast<std::size_t>(i) * depth.width() + j;
      if (depth.valid(i, j)) {
        disp[k] = rig.bf() / values[k];
        valid[k] = 1;
      }
    }
  }
  return {DisparityField(depth.height(), depth.width(), std::move(disp)),
          BinaryMask(depth.height(), depth.width(), std::move(valid))};
}

}  // namespace m3d
