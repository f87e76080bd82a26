#pragma once

// The three image-space loss terms, each returning its value together with
// the analytic gradient with respect to the disparity field(s) it depends on.

#include "m3d/fields.hpp"
#include "m3d/warp.hpp"

namespace m3d {

/// Box-window SSIM settings; constants are on the [0, 1] intensity scale.
struct SsimParams {
  int window = 3;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  void validate() const;
};

struct TermValueGrad {
  double value = 0.0;
  ScalarField grad_dl;
  ScalarField grad_dr;
  /// Set when the term had no pixel to average over and was defined as 0.
  bool empty = false;

  static TermValueGrad zero(Size2 size);
  [[nodiscard]] ScalarField& grad(View view) { return view == View::left ? grad_dl : grad_dr; }
  [[nodiscard]] const ScalarField& grad(View view) const {
    return view == View::left ? grad_dl : grad_dr;
  }
};

/// Per-pixel SSIM averaged over channels. Window statistics use only the
/// pixels of the window that lie inside the image and inside `mask`;
/// centers outside the mask are reported as 0.
ScalarField ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimParams& p,
                     const BinaryMask& mask);
ScalarField ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimParams& p = {});

/// Masked mean of gamma/2 (1 - SSIM) + (1 - gamma) |I - I*|_1 (channel mean).
/// The gradient lands on the disparity that drove `reconstructed`.
TermValueGrad appearance_loss(const ImagePlane& original, const WarpResult& reconstructed,
                              const BinaryMask& mask, double gamma, const SsimParams& p = {});

/// One view of the left-right disparity consistency: the masked mean of
/// |d_own(x) - d_other(x +/- d_own(x))|, with the other field sampled linearly.
TermValueGrad lr_consistency_term(View view, const DisparityField& dl, const DisparityField& dr,
                                  const BinaryMask& mask);

struct LrConsistency {
  TermValueGrad left;
  TermValueGrad right;
};

LrConsistency lr_consistency_loss(const DisparityField& dl, const DisparityField& dr,
                                  const BinaryMask& mask_l, const BinaryMask& mask_r);

/// Edge-aware smoothness: mean over pixels with a forward neighbor of
/// |dx d| exp(-|dx I|) plus the same for the vertical direction. Image
/// gradients are channel means of absolute forward differences. Where the
/// pixel or its neighbor lies outside `mask`, the edge weight is 1, so image
/// content there has no influence.
TermValueGrad smoothness_loss(const DisparityField& d, const ImagePlane& img, View view,
                              const BinaryMask& mask);
TermValueGrad smoothness_loss(const DisparityField& d, const ImagePlane& img,
                              View view = View::left);

}  // namespace m3d
