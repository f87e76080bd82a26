#include "m3d/photometric.hpp"

#include <algorithm>
#include <cmath>

#include "m3d/errors.hpp"

namespace m3d {
namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// SSIM of one channel at one center plus the partial derivatives needed to
/// back-propagate into the second image's window pixels.
struct WindowSsim {
  double value = 0.0;
  double mu_a = 0.0;
  double mu_b = 0.0;
  // dS/db_q = coef_mu + coef_var * (b_q - mu_b) + coef_cov * (a_q - mu_a)
  double coef_mu = 0.0;
  double coef_var = 0.0;
  double coef_cov = 0.0;
};

class MaskedWindow {
 public:
  MaskedWindow(const ImagePlane& a, const ImagePlane& b, const BinaryMask& mask, int radius)
      : a_(a), b_(b), mask_(mask), radius_(radius) {}

  template <typename F>
  void for_each(int i, int j, F&& f) const {
    const int i_lo = std::max(0, i - radius_), i_hi = std::min(a_.height() - 1, i + radius_);
    const int j_lo = std::max(0, j - radius_), j_hi = std::min(a_.width() - 1, j + radius_);
    for (int y = i_lo; y <= i_hi; ++y) {
      for (int x = j_lo; x <= j_hi; ++x) {
        if (mask_(y, x)) f(y, x);
      }
    }
  }

  WindowSsim evaluate(int i, int j, int c, const SsimParams& p) const {
    int n = 0;
    double sa = 0.0, sb = 0.0;
    for_each(i, j, [&](int y, int x) {
      ++n;
      sa += a_(y, x, c);
      sb += b_(y, x, c);
    });
    WindowSsim w;
    w.mu_a = sa / n;
    w.mu_b = sb / n;
    double vaa = 0.0, vbb = 0.0, vab = 0.0;
    for_each(i, j, [&](int y, int x) {
      const double da = a_(y, x, c) - w.mu_a;
      const double db = b_(y, x, c) - w.mu_b;
      vaa += da * da;
      vbb += db * db;
      vab += da * db;
    });
    vaa /= n;
    vbb /= n;
    vab /= n;

    const double num_l = 2.0 * w.mu_a * w.mu_b + p.c1;
    const double num_c = 2.0 * vab + p.c2;
    const double den_l = w.mu_a * w.mu_a + w.mu_b * w.mu_b + p.c1;
    const double den_c = vaa + vbb + p.c2;
    const double s = (num_l * num_c) / (den_l * den_c);
    w.value = s;

    const double ds_dmu = s * (2.0 * w.mu_a / num_l - 2.0 * w.mu_b / den_l);
    const double ds_dvar = -s / den_c;
    const double ds_dcov = 2.0 * s / num_c;
    w.coef_mu = ds_dmu / n;
    w.coef_var = 2.0 * ds_dvar / n;
    w.coef_cov = ds_dcov / n;
    return w;
  }

 private:
  const ImagePlane& a_;
  const ImagePlane& b_;
  const BinaryMask& mask_;
  int radius_;
};

void require_compatible(const ImagePlane& a, const ImagePlane& b, const char* what) {
  require_same_size(a.size(), b.size(), what);
  if (a.channels() != b.channels()) throw InvalidArgument(std::string(what) + ": channel mismatch");
}

}  // namespace

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0) throw InvalidArgument("SsimParams: window must be odd and >= 3");
  if (!(c1 > 0.0 && c2 > 0.0)) throw InvalidArgument("SsimParams: c1 and c2 must be positive");
}

TermValueGrad TermValueGrad::zero(Size2 size) {
  return {0.0, ScalarField(size.height, size.width), ScalarField(size.height, size.width), false};
}

ScalarField ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimParams& p,
                     const BinaryMask& mask) {
  require_compatible(a, b, "ssim_map");
  require_same_size(a.size(), mask.size(), "ssim_map mask");
  p.validate();
  const MaskedWindow window(a, b, mask, p.window / 2);
  ScalarField out(a.height(), a.width());
  for (int i = 0; i < a.height(); ++i) {
    for (int j = 0; j < a.width(); ++j) {
      if (!mask(i, j)) continue;
      double s = 0.0;
      for (int c = 0; c < a.channels(); ++c) s += window.evaluate(i, j, c, p).value;
      out(i, j) = s / a.channels();
    }
  }
  return out;
}

ScalarField ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimParams& p) {
  return ssim_map(a, b, p, BinaryMask::ones(a.height(), a.width()));
}

TermValueGrad appearance_loss(const ImagePlane& original, const WarpResult& reconstructed,
                              const BinaryMask& mask, double gamma, const SsimParams& p) {
  const ImagePlane& rec = reconstructed.reconstructed;
  require_compatible(original, rec, "appearance_loss");
  require_same_size(original.size(), mask.size(), "appearance_loss mask");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("appearance_loss: gamma outside [0, 1]");
  p.validate();

  const int h = original.height();
  const int w = original.width();
  const int ch = original.channels();
  TermValueGrad out = TermValueGrad::zero(original.size());
  const auto n_in = mask.count();
  if (n_in == 0) {
    out.empty = true;
    return out;
  }
  const double inv_n = 1.0 / static_cast<double>(n_in);
  const double ssim_weight = gamma / 2.0;
  const double l1_weight = 1.0 - gamma;

  // dL/d rec(i, j, c), accumulated before the warp jacobian is applied.
  std::vector<double> d_rec(rec.data().size(), 0.0);
  auto d_rec_at = [&](int i, int j, int c) -> double& {
    return d_rec[(static_cast<std::size_t>(i) * w + j) * ch + c];
  };

  const MaskedWindow window(original, rec, mask, p.window / 2);
  double total = 0.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!mask(i, j)) continue;
      double ssim = 0.0;
      double l1 = 0.0;
      for (int c = 0; c < ch; ++c) {
        const WindowSsim s = window.evaluate(i, j, c, p);
        ssim += s.value;
        const double diff = rec(i, j, c) - original(i, j, c);
        l1 += std::abs(diff);
        d_rec_at(i, j, c) += l1_weight / ch * sign_of(diff) * inv_n;

        const double scale = -ssim_weight / ch * inv_n;
        window.for_each(i, j, [&](int y, int x) {
          d_rec_at(y, x, c) += scale * (s.coef_mu + s.coef_var * (rec(y, x, c) - s.mu_b) +
                                        s.coef_cov * (original(y, x, c) - s.mu_a));
        });
      }
      total += ssim_weight * (1.0 - ssim / ch) + l1_weight * l1 / ch;
    }
  }
  out.value = total * inv_n;

  const View view = target_view(reconstructed.direction);
  ScalarField& grad = out.grad(view);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double g = 0.0;
      for (int c = 0; c < ch; ++c) g += d_rec_at(i, j, c) * reconstructed.jacobian(i, j, c);
      grad(i, j) = g;
    }
  }
  return out;
}

TermValueGrad lr_consistency_term(View view, const DisparityField& dl, const DisparityField& dr,
                                  const BinaryMask& mask) {
  require_same_size(dl.size(), dr.size(), "lr_consistency_term");
  require_same_size(dl.size(), mask.size(), "lr_consistency_term mask");
  const DisparityField& own = view == View::left ? dl : dr;
  const DisparityField& other = view == View::left ? dr : dl;
  const View other_view = view == View::left ? View::right : View::left;
  const double sigma = coordinate_sign(view);

  TermValueGrad out = TermValueGrad::zero(dl.size());
  const auto n_in = mask.count();
  if (n_in == 0) {
    out.empty = true;
    return out;
  }
  const double inv_n = 1.0 / static_cast<double>(n_in);
  ScalarField& g_own = out.grad(view);
  ScalarField& g_other = out.grad(other_view);

  double total = 0.0;
  for (int i = 0; i < own.height(); ++i) {
    const auto other_row = other.row(i);
    for (int j = 0; j < own.width(); ++j) {
      if (!mask(i, j)) continue;
      const RowSample s = sample_row(other_row, correspondent_column(view, j, own(i, j)));
      const double r = own(i, j) - s.value;
      total += std::abs(r);
      const double sg = sign_of(r) * inv_n;
      g_own(i, j) += sg * (1.0 - sigma * s.slope);
      g_other(i, s.i0) -= sg * s.w0;
      g_other(i, s.i1) -= sg * s.w1;
    }
  }
  out.value = total * inv_n;
  return out;
}

LrConsistency lr_consistency_loss(const DisparityField& dl, const DisparityField& dr,
                                  const BinaryMask& mask_l, const BinaryMask& mask_r) {
  return {lr_consistency_term(View::left, dl, dr, mask_l),
          lr_consistency_term(View::right, dl, dr, mask_r)};
}

TermValueGrad smoothness_loss(const DisparityField& d, const ImagePlane& img, View view,
                              const BinaryMask& mask) {
  require_same_size(d.size(), img.size(), "smoothness_loss");
  require_same_size(d.size(), mask.size(), "smoothness_loss mask");
  const int h = d.height();
  const int w = d.width();
  const int ch = img.channels();
  TermValueGrad out = TermValueGrad::zero(d.size());
  ScalarField& grad = out.grad(view);

  auto edge_weight = [&](int i0, int j0, int i1, int j1) {
    if (!mask(i0, j0) || !mask(i1, j1)) return 1.0;
    double g = 0.0;
    for (int c = 0; c < ch; ++c) g += std::abs(img(i1, j1, c) - img(i0, j0, c));
    return std::exp(-g / ch);
  };

  if (w > 1) {
    const double inv_n = 1.0 / (static_cast<double>(h) * (w - 1));
    double sum = 0.0;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j + 1 < w; ++j) {
        const double wt = edge_weight(i, j, i, j + 1);
        const double diff = d(i, j + 1) - d(i, j);
        sum += std::abs(diff) * wt;
        const double g = sign_of(diff) * wt * inv_n;
        grad(i, j + 1) += g;
        grad(i, j) -= g;
      }
    }
    out.value += sum * inv_n;
  }
  if (h > 1) {
    const double inv_n = 1.0 / (static_cast<double>(h - 1) * w);
    double sum = 0.0;
    for (int i = 0; i + 1 < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double wt = edge_weight(i, j, i + 1, j);
        const double diff = d(i + 1, j) - d(i, j);
        sum += std::abs(diff) * wt;
        const double g = sign_of(diff) * wt * inv_n;
        grad(i + 1, j) += g;
        grad(i, j) -= g;
      }
    }
    out.value += sum * inv_n;
  }
  return out;
}

TermValueGrad smoothness_loss(const DisparityField& d, const ImagePlane& img, View view) {
  return smoothness_loss(d, img, view, BinaryMask::ones(d.height(), d.width()));
}

}  // namespace m3d
