#include "blurforge/warp.hpp"

#include <cmath>
#include <vector>

#include "blurforge/error.hpp"

namespace blurforge {
namespace {

// Per output coordinate: floor of the sample position and its fractional part.
struct Axis {
  std::vector<int> base;
  std::vector<double> frac;
};

Axis sample_axis(int n, double shift) {
  Axis axis;
  axis.base.resize(n);
  axis.frac.resize(n);
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) - shift;
    const double f = std::floor(s);
    axis.base[k] = static_cast<int>(f);
    axis.frac[k] = s - f;
  }
  return axis;
}

class Sampler {
 public:
  Sampler(const Image& img, Padding padding) : img_(img), padding_(padding) {}

  double operator()(int y, int x, int c) const {
    if (padding_ == Padding::Replicate) {
      y = y < 0 ? 0 : (y >= img_.height ? img_.height - 1 : y);
      x = x < 0 ? 0 : (x >= img_.width ? img_.width - 1 : x);
      return img_.at(y, x, c);
    }
    if (y < 0 || y >= img_.height || x < 0 || x >= img_.width) return 0.0;
    return img_.at(y, x, c);
  }

 private:
  const Image& img_;
  Padding padding_;
};

void check_translation(Translation t) {
  if (!std::isfinite(t.tx) || !std::isfinite(t.ty) || std::abs(t.tx) > 1.0 || std::abs(t.ty) > 1.0) {
    fail(Errc::InvalidInput, "translation components must be finite and within [-1, 1]");
  }
}

}  // namespace

Image translate(const Image& img, Translation t, Padding padding) {
  require_valid(img, "translate");
  check_translation(t);
  if (t.tx == 0.0 && t.ty == 0.0) return img;

  const Axis ax = sample_axis(img.width, t.tx * img.width);
  const Axis ay = sample_axis(img.height, t.ty * img.height);
  const Sampler sample(img, padding);

  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    const int y0 = ay.base[y];
    const double fy = ay.frac[y];
    for (int x = 0; x < img.width; ++x) {
      const int x0 = ax.base[x];
      const double fx = ax.frac[x];
      const double w00 = (1.0 - fy) * (1.0 - fx);
      const double w01 = (1.0 - fy) * fx;
      const double w10 = fy * (1.0 - fx);
      const double w11 = fy * fx;
      for (int c = 0; c < img.channels; ++c) {
        // Zero-weight corners are skipped so that integer shifts reproduce
        // the source values exactly.
        double v = w00 * sample(y0, x0, c);
        if (w01 != 0.0) v += w01 * sample(y0, x0 + 1, c);
        if (w10 != 0.0) v += w10 * sample(y0 + 1, x0, c);
        if (w11 != 0.0) v += w11 * sample(y0 + 1, x0 + 1, c);
        out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

TranslationGrad translate_grad(const Image& img, Translation t, const Image& upstream, Padding padding) {
  require_valid(img, "translate_grad");
  require_same_shape(img, upstream, "translate_grad");
  check_translation(t);

  const Axis ax = sample_axis(img.width, t.tx * img.width);
  const Axis ay = sample_axis(img.height, t.ty * img.height);
  const Sampler sample(img, padding);

  // d(sample_x)/d(tx) = -W and d(sample_y)/d(ty) = -H.
  double gx = 0.0;
  double gy = 0.0;
  for (int y = 0; y < img.height; ++y) {
    const int y0 = ay.base[y];
    const double fy = ay.frac[y];
    for (int x = 0; x < img.width; ++x) {
      const int x0 = ax.base[x];
      const double fx = ax.frac[x];
      for (int c = 0; c < img.channels; ++c) {
        const double u = upstream.at(y, x, c);
        if (u == 0.0) continue;
        const double a = sample(y0, x0, c);
        const double b = sample(y0, x0 + 1, c);
        const double cc = sample(y0 + 1, x0, c);
        const double d = sample(y0 + 1, x0 + 1, c);
        gx += u * ((1.0 - fy) * (b - a) + fy * (d - cc));
        gy += u * ((1.0 - fx) * (cc - a) + fx * (d - b));
      }
    }
  }
  return {-gx * img.width, -gy * img.height};
}

}  // namespace blurforge
