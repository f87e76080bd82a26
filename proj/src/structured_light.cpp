#include "m3d/structured_light.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "m3d/errors.hpp"

namespace m3d {
namespace {

double channel_mean(const ImagePlane& img, int i, int j) {
  double s = 0.0;
  for (int c = 0; c < img.channels(); ++c) s += img(i, j, c);
  return s / img.channels();
}

}  // namespace

std::uint32_t binary_to_gray(std::uint32_t b) { return b ^ (b >> 1); }

std::uint32_t gray_to_binary(std::uint32_t g) {
  std::uint32_t b = g;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) b ^= b >> shift;
  return b;
}

std::uint32_t GrayCodeSet::codeword(int column) const {
  std::uint32_t code = 0;
  for (int k = 0; k < bit_count; ++k) code = (code << 1) | patterns[k][column];
  return code;
}

GrayCodeSet generate_gray_patterns(int projector_width) {
  if (projector_width < 2) throw InvalidArgument("generate_gray_patterns: width must be >= 2");
  GrayCodeSet set;
  set.projector_width = projector_width;
  set.bit_count = std::bit_width(static_cast<std::uint32_t>(projector_width - 1));
  for (int k = 0; k < set.bit_count; ++k) {
    const int bit = set.bit_count - 1 - k;
    std::vector<std::uint8_t> p(projector_width), inv(projector_width);
    for (int c = 0; c < projector_width; ++c) {
      p[c] = (binary_to_gray(static_cast<std::uint32_t>(c)) >> bit) & 1u;
      inv[c] = 1 - p[c];
    }
    set.patterns.push_back(std::move(p));
    set.inverses.push_back(std::move(inv));
  }
  return set;
}

CorrespondenceMap decode_gray(const std::vector<ImagePlane>& captures,
                              const std::vector<ImagePlane>& inverse_captures,
                              int projector_width, double epsilon) {
  if (projector_width < 2) throw InvalidArgument("decode_gray: width must be >= 2");
  const auto bits = static_cast<std::size_t>(std::bit_width(static_cast<std::uint32_t>(projector_width - 1)));
  if (captures.size() != bits || inverse_captures.size() != bits) {
    throw InvalidArgument("decode_gray: expected " + std::to_string(bits) +
                          " captures and as many inverses");
  }
  const Size2 size = captures.front().size();
  for (std::size_t k = 0; k < bits; ++k) {
    require_same_size(size, captures[k].size(), "decode_gray captures");
    require_same_size(size, inverse_captures[k].size(), "decode_gray inverse captures");
  }

  std::vector<int> column(size.area(), -1);
  std::vector<std::uint8_t> certain(size.area(), 0);
  for (int i = 0; i < size.height; ++i) {
    for (int j = 0; j < size.width; ++j) {
      std::uint32_t code = 0;
      bool ok = true;
      for (std::size_t k = 0; k < bits && ok; ++k) {
        const double diff = channel_mean(captures[k], i, j) - channel_mean(inverse_captures[k], i, j);
        ok = std::abs(diff) >= epsilon;
        code = (code << 1) | (diff > 0.0 ? 1u : 0u);
      }
      if (!ok) continue;
      const std::uint32_t c = gray_to_binary(code);
      if (c >= static_cast<std::uint32_t>(projector_width)) continue;
      const auto idx = static_cast<std::size_t>(i) * size.width + j;
      column[idx] = static_cast<int>(c);
      certain[idx] = 1;
    }
  }
  return {std::move(column), BinaryMask(size.height, size.width, std::move(certain))};
}

void ProjectorModel::validate() const {
  if (!(std::isfinite(focal) && focal > 0.0)) throw InvalidArgument("ProjectorModel: focal must be > 0");
  if (!std::isfinite(cx)) throw InvalidArgument("ProjectorModel: cx must be finite");
  if (!(std::isfinite(baseline) && baseline != 0.0)) {
    throw InvalidArgument("ProjectorModel: baseline must be non-zero");
  }
  if (width < 2) throw InvalidArgument("ProjectorModel: width must be >= 2");
}

ScalarField projector_columns(const DepthMap& depth, const CameraRig& rig,
                              const ProjectorModel& projector) {
  projector.validate();
  require_same_size(depth.size(), rig.size(), "projector_columns");
  ScalarField out(depth.height(), depth.width(), std::nan(""));
  for (int i = 0; i < depth.height(); ++i) {
    for (int j = 0; j < depth.width(); ++j) {
      if (!depth.valid(i, j)) continue;
      const double z = depth(i, j);
      const double x = (j - rig.cx()) * z / rig.focal();
      out(i, j) = projector.focal * (x - projector.baseline) / z + projector.cx;
    }
  }
  return out;
}

GrayCaptures render_gray_captures(const ScalarField& columns, const GrayCodeSet& set, double bright,
                                  double dark) {
  const int h = columns.height(), w = columns.width();
  GrayCaptures out;
  for (int k = 0; k < set.bit_count; ++k) {
    std::vector<double> on(columns.size().area()), off(columns.size().area());
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const auto idx = columns.index(i, j);
        const double c = std::round(columns(i, j));
        if (!(c >= 0.0 && c < set.projector_width)) {
          on[idx] = off[idx] = dark;
          continue;
        }
        const bool lit = set.patterns[k][static_cast<std::size_t>(c)] != 0;
        on[idx] = lit ? bright : dark;
        off[idx] = lit ? dark : bright;
      }
    }
    out.captures.emplace_back(h, w, 1, std::move(on));
    out.inverse_captures.emplace_back(h, w, 1, std::move(off));
  }
  return out;
}

ModulationResult modulation_depth(const PhasePatternSet& p) {
  require_same_size(p.i1.size(), p.i2.size(), "modulation_depth");
  require_same_size(p.i1.size(), p.i3.size(), "modulation_depth");
  const int h = p.i1.height(), w = p.i1.width();
  ScalarField t(h, w);
  std::vector<std::uint8_t> certain(t.size().area());
  const double k = 2.0 * std::sqrt(2.0) / 3.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double a = channel_mean(p.i1, i, j), b = channel_mean(p.i2, i, j),
                   c = channel_mean(p.i3, i, j);
      const double v = k * std::sqrt((a - b) * (a - b) + (b - c) * (b - c) + (a - c) * (a - c));
      t(i, j) = v;
      certain[t.index(i, j)] = v >= p.threshold;
    }
  }
  return {std::move(t), BinaryMask(h, w, std::move(certain))};
}

PhasePatternSet render_phase_captures(const ScalarField& phase, double offset, double amplitude,
                                      const std::array<double, 3>& shifts) {
  const int h = phase.height(), w = phase.width();
  std::array<std::vector<double>, 3> data;
  for (int s = 0; s < 3; ++s) {
    data[s].resize(phase.size().area());
    for (std::size_t k = 0; k < data[s].size(); ++k) {
      data[s][k] = offset + amplitude * std::cos(phase.values()[k] + shifts[s]);
    }
  }
  PhasePatternSet out{ImagePlane(h, w, 1, std::move(data[0])), ImagePlane(h, w, 1, std::move(data[1])),
                      ImagePlane(h, w, 1, std::move(data[2])), shifts, kModulationThreshold};
  return out;
}

DepthMap triangulate(const CorrespondenceMap& c, const CameraRig& rig,
                     const ProjectorModel& projector) {
  projector.validate();
  require_same_size(c.certain.size(), rig.size(), "triangulate");
  const int h = c.height(), w = c.width();
  std::vector<double> depth(c.certain.size().area(), 0.0);
  std::vector<std::uint8_t> valid(depth.size(), 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!c.certain(i, j)) continue;
      // Z solves (j - cx)/f - (p - cx_p)/f_p = b / Z; with identical
      // intrinsics this is Z = b f / (j - p).
      const double ray = (j - rig.cx()) / rig.focal() - (c.at(i, j) - projector.cx) / projector.focal;
      if (std::abs(ray) * rig.focal() < kMinDisparity) continue;
      const double z = projector.baseline / ray;
      if (!(std::isfinite(z) && z > 0.0)) continue;
      const auto idx = static_cast<std::size_t>(i) * w + j;
      depth[idx] = z;
      valid[idx] = 1;
    }
  }
  return DepthMap(h, w, std::move(depth), std::move(valid));
}

}  // namespace m3d
