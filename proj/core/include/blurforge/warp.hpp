#pragma once

#include "blurforge/image.hpp"

namespace blurforge {

/// Bilinear sub-pixel translation. Output pixel (x, y) samples the input at
/// (x - tx*W, y - ty*H); samples outside the frame follow `padding`.
Image translate(const Image& img, Translation t, Padding padding = Padding::Zero);

struct TranslationGrad {
  double dtx = 0.0;
  double dty = 0.0;
};

/// <upstream, d translate / d t>, evaluated analytically. On lattice points
/// the derivative is taken from the cell on the positive side.
TranslationGrad translate_grad(const Image& img, Translation t, const Image& upstream,
                               Padding padding = Padding::Zero);

}  // namespace blurforge
