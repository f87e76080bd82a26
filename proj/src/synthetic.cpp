#include "m3d/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "m3d/errors.hpp"

namespace m3d {
namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Smooth value noise on a unit lattice; output in [-1, 1].
class ValueNoise {
 public:
  explicit ValueNoise(std::uint64_t seed) : seed_(seed) {}

  double operator()(double u, double v) const {
    const double fu = std::floor(u), fv = std::floor(v);
    const auto iu = static_cast<std::int64_t>(fu), iv = static_cast<std::int64_t>(fv);
    const double su = fade(u - fu), sv = fade(v - fv);
    const double a = lattice(iu, iv), b = lattice(iu + 1, iv);
    const double c = lattice(iu, iv + 1), d = lattice(iu + 1, iv + 1);
    const double top = a + su * (b - a);
    const double bottom = c + su * (d - c);
    return top + sv * (bottom - top);
  }

 private:
  static double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

  double lattice(std::int64_t i, std::int64_t j) const {
    const std::uint64_t h = mix(seed_ ^ mix(static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull ^
                                            mix(static_cast<std::uint64_t>(j) + 0x632BE59BD9B4E019ull)));
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }

  std::uint64_t seed_;
};

class Texture {
 public:
  Texture(const TextureSpec& spec, double base_period_world, std::uint64_t seed)
      : spec_(spec), base_frequency_(1.0 / base_period_world) {
    for (int c = 0; c < spec.channels; ++c) {
      for (int o = 0; o < spec.octaves; ++o) {
        layers_.emplace_back(mix(seed * 0x100 + static_cast<std::uint64_t>(c * 16 + o + 1)));
      }
    }
  }

  double operator()(double x, double y, int channel) const {
    double sum = 0.0, norm = 0.0, amp = 1.0, freq = base_frequency_;
    for (int o = 0; o < spec_.octaves; ++o) {
      sum += amp * layers_[static_cast<std::size_t>(channel * spec_.octaves + o)](x * freq, y * freq);
      norm += amp;
      amp *= 0.5;
      freq *= 2.0;
    }
    return 0.5 + 0.5 * spec_.contrast * sum / norm;
  }

 private:
  TextureSpec spec_;
  double base_frequency_;
  std::vector<ValueNoise> layers_;
};

/// Depth along the ray through column x (row-independent surfaces), in the
/// left camera frame, for a camera centred at (x_offset, 0, 0).
class SurfaceModel {
 public:
  SurfaceModel(const SurfaceSpec& spec, const CameraRig& rig) : spec_(spec), rig_(rig) {}

  double depth(View view, double x) const {
    const double f = rig_.focal();
    const double a = (x - rig_.cx()) / f;
    const double x_offset = view == View::right ? rig_.baseline() : 0.0;
    switch (spec_.kind) {
      case SurfaceKind::fronto_parallel:
        return spec_.depth;
      case SurfaceKind::slanted: {
        const double d0 = rig_.bf() / spec_.depth;
        const double d_left = d0 + spec_.slope * (x - rig_.cx());
        const double d = view == View::left ? d_left : d_left / (1.0 - spec_.slope);
        return rig_.bf() / d;
      }
      case SurfaceKind::sinusoidal: {
        const double k = 2.0 * std::numbers::pi / spec_.period;
        double z = spec_.depth;
        for (int it = 0; it < 100; ++it) {
          const double phase = k * (a * z + x_offset);
          const double g = z - spec_.depth - spec_.amplitude * std::sin(phase);
          const double dg = 1.0 - spec_.amplitude * k * a * std::cos(phase);
          const double step = g / dg;
          z -= step;
          if (std::abs(step) <= 1e-15 * std::abs(z)) break;
        }
        return z;
      }
    }
    return spec_.depth;
  }

  void validate() const {
    if (!(spec_.depth > 0.0)) throw InvalidArgument("synth_scene: surface behind the camera");
    if (spec_.kind == SurfaceKind::slanted && !(spec_.slope < 1.0)) {
      throw InvalidArgument("synth_scene: slope must be < 1");
    }
    if (spec_.kind == SurfaceKind::sinusoidal) {
      if (!(spec_.period > 0.0 && spec_.amplitude >= 0.0 && spec_.amplitude < spec_.depth)) {
        throw InvalidArgument("synth_scene: relief must stay in front of the camera");
      }
      const double k = 2.0 * std::numbers::pi / spec_.period;
      const double a_max = std::max(rig_.cx(), rig_.width() - 1 - rig_.cx()) / rig_.focal();
      if (spec_.amplitude * k * a_max >= 0.5) {
        throw InvalidArgument("synth_scene: relief too steep for a unique ray intersection");
      }
    }
  }

 private:
  SurfaceSpec spec_;
  CameraRig rig_;
};

}  // namespace

std::string to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::fronto_parallel: return "plane";
    case SurfaceKind::slanted: return "slant";
    case SurfaceKind::sinusoidal: return "relief";
  }
  return "plane";
}

SurfaceKind surface_from_string(const std::string& name) {
  if (name == "plane") return SurfaceKind::fronto_parallel;
  if (name == "slant") return SurfaceKind::slanted;
  if (name == "relief") return SurfaceKind::sinusoidal;
  throw InvalidArgument("unknown surface '" + name + "'");
}

SyntheticScene synth_scene(const SyntheticSceneSpec& spec, std::uint64_t seed) {
  const CameraRig& rig = spec.rig;
  const SurfaceModel surface(spec.surface, rig);
  surface.validate();
  if (spec.texture.channels != 1 && spec.texture.channels != 3) {
    throw InvalidArgument("synth_scene: texture channels must be 1 or 3");
  }
  if (spec.texture.octaves < 1 || !(spec.texture.contrast >= 0.0 && spec.texture.contrast <= 1.0)) {
    throw InvalidArgument("synth_scene: invalid texture");
  }
  if (spec.occluder_band < 0 || spec.occluder_band >= rig.width()) {
    throw InvalidArgument("synth_scene: occluder band out of range");
  }

  const int h = rig.height(), w = rig.width(), ch = spec.texture.channels;
  const Texture texture(spec.texture, spec.texture.base_period_px * spec.surface.depth / rig.focal(),
                        seed);

  std::vector<double> img_l(Size2{h, w}.area() * ch), img_r(img_l.size());
  std::vector<double> disp_l(Size2{h, w}.area()), disp_r(disp_l.size());
  std::vector<double> depth_l(disp_l.size()), depth_r(disp_l.size());
  std::vector<std::uint8_t> cov_l(disp_l.size()), cov_r(disp_l.size());

  for (int view_idx = 0; view_idx < 2; ++view_idx) {
    const View view = view_idx == 0 ? View::left : View::right;
    auto& img = view == View::left ? img_l : img_r;
    auto& disp = view == View::left ? disp_l : disp_r;
    auto& depth = view == View::left ? depth_l : depth_r;
    auto& cov = view == View::left ? cov_l : cov_r;
    for (int j = 0; j < w; ++j) {
      const double z = surface.depth(view, j);
      if (!(std::isfinite(z) && z > 0.0)) {
        throw InvalidArgument("synth_scene: surface behind the camera or at non-positive depth");
      }
      const double d = rig.bf() / z;
      const double x_world = (j - rig.cx()) * z / rig.focal() + (view == View::right ? rig.baseline() : 0.0);
      const double partner = correspondent_column(view, j, d);
      const bool seen_by_other = view == View::left
                                     ? partner >= spec.occluder_band && partner <= w - 1
                                     : j >= spec.occluder_band && partner >= 0.0 && partner <= w - 1;
      for (int i = 0; i < h; ++i) {
        const auto k = static_cast<std::size_t>(i) * w + j;
        const double y_world = (i - rig.cy()) * z / rig.focal();
        disp[k] = d;
        depth[k] = z;
        cov[k] = seen_by_other;
        for (int c = 0; c < ch; ++c) {
          const bool occluded = view == View::right && j < spec.occluder_band;
          img[k * ch + c] = occluded ? kOccluderIntensity : texture(x_world, y_world, c);
        }
      }
    }
  }

  return {StereoPair{ImagePlane(h, w, ch, std::move(img_l)), ImagePlane(h, w, ch, std::move(img_r))},
          DisparityField(h, w, std::move(disp_l)),
          DisparityField(h, w, std::move(disp_r)),
          DepthMap::from_values(h, w, std::move(depth_l)),
          DepthMap::from_values(h, w, std::move(depth_r)),
          BinaryMask(h, w, std::move(cov_l)),
          BinaryMask(h, w, std::move(cov_r)),
          rig};
}

SyntheticSceneSpec scene_preset(const std::string& name, int height, int width) {
  if (height < 8 || width < 8) throw InvalidArgument("scene_preset: image too small");
  const double scale = width / 80.0;
  SyntheticSceneSpec spec{
      {}, {}, CameraRig(80.0 * scale, (width - 1) / 2.0, (height - 1) / 2.0, 5.0, width, height), 0};
  spec.texture.base_period_px = 64.0 * scale;
  if (name == "plane") {
    spec.surface.kind = SurfaceKind::fronto_parallel;
  } else if (name == "slant" || name == "slant-occluded") {
    spec.surface.kind = SurfaceKind::slanted;
    spec.surface.slope = 0.05;
    if (name == "slant-occluded") spec.occluder_band = static_cast<int>(std::lround(6 * scale));
  } else if (name == "relief") {
    spec.surface.kind = SurfaceKind::sinusoidal;
    spec.surface.amplitude = 2.0;
    spec.surface.period = 20.0;
  } else {
    throw InvalidArgument("unknown scene preset '" + name + "'");
  }
  return spec;
}

}  // namespace m3d
