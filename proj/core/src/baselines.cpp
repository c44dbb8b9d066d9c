#include <algorithm>
#include <cmath>

#include "blurforge/attack.hpp"
#include "blurforge/error.hpp"
#include "blurforge/filter.hpp"

namespace blurforge {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_eps(double eps_a) {
  if (!(eps_a > 0.0 && eps_a <= 1.0)) fail(Errc::InvalidInput, "eps_a must lie in (0, 1]");
}

// Clamp to the eps L-inf ball around `center` and to [0, 1]. Rounding in
// (center + eps) - center is corrected so |x - center| <= eps holds as
// computed in double.
double project_pixel(double x, double center, double eps) {
  x = std::clamp(x, center - eps, center + eps);
  x = std::clamp(x, 0.0, 1.0);
  while (x - center > eps) x = std::nextafter(x, center);
  while (center - x > eps) x = std::nextafter(x, center);
  return x;
}

}  // namespace

Image fgsm(const Classifier& model, const Image& img, int label, double eps_a) {
  check_eps(eps_a);
  require_input(model, img, "fgsm");
  require_label(model, label, "fgsm");
  const LossGrad lg = model.input_grad(img, label);
  Image adv = img;
  for (std::size_t i = 0; i < adv.data.size(); ++i) {
    adv.data[i] = project_pixel(img.data[i] + eps_a * sign(lg.grad.data[i]), img.data[i], eps_a);
  }
  return adv;
}

Image mifgsm(const Classifier& model, const Image& img, int label, double eps_a, int iterations, double mu) {
  check_eps(eps_a);
  if (iterations < 1) fail(Errc::InvalidInput, "mifgsm: iterations must be >= 1");
  require_input(model, img, "mifgsm");
  require_label(model, label, "mifgsm");

  const double step = eps_a / iterations;
  std::vector<double> momentum(img.data.size(), 0.0);
  Image adv = img;
  for (int t = 0; t < iterations; ++t) {
    const LossGrad lg = model.input_grad(adv, label);
    double l1 = 0.0;
    for (double g : lg.grad.data) l1 += std::abs(g);
    for (std::size_t i = 0; i < adv.data.size(); ++i) {
      momentum[i] = mu * momentum[i] + (l1 > 0.0 ? lg.grad.data[i] / l1 : 0.0);
      adv.data[i] = project_pixel(adv.data[i] + step * sign(momentum[i]), img.data[i], eps_a);
    }
  }
  return adv;
}

Image blur_baseline(const Image& img, const SaliencyMask& mask, BlurKind kind, double size, BlurRegion region) {
  require_valid(img, "blur_baseline");
  require_same_shape(img, mask, "blur_baseline");
  if (!(size > 0.0) || !std::isfinite(size)) fail(Errc::InvalidInput, "blur_baseline: size must be positive");

  Image blurred;
  if (kind == BlurKind::Gauss) {
    const std::vector<double> taps = gaussian_kernel_1d(size);
    blurred = conv2d_separable(img, taps, taps, Padding::Replicate);
  } else {
    blurred = conv2d_fixed(img, disk_kernel(std::max(size, 1.0)), Padding::Replicate);
  }
  if (region == BlurRegion::Whole) return blurred;

  const std::uint8_t inside = region == BlurRegion::Obj ? 1 : 0;
  Image out = img;
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (mask.bits[p] != inside) continue;
    for (int c = 0; c < img.channels; ++c) out.data[p * img.channels + c] = blurred.data[p * img.channels + c];
  }
  return out;
}

std::vector<double> evaluate(const std::vector<const Classifier*>& models, const std::vector<Image>& adversarial,
                             const std::vector<int>& labels) {
  if (adversarial.empty()) fail(Errc::EmptyInput, "evaluate: empty adversarial set");
  if (adversarial.size() != labels.size()) fail(Errc::InvalidInput, "evaluate: image and label counts differ");
  std::vector<double> rates;
  rates.reserve(models.size());
  for (const Classifier* model : models) {
    std::size_t fooled = 0;
    for (std::size_t i = 0; i < adversarial.size(); ++i) fooled += predict(*model, adversarial[i]).label != labels[i];
    rates.push_back(static_cast<double>(fooled) / static_cast<double>(adversarial.size()));
  }
  return rates;
}

}  // namespace blurforge
