#include "blurforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "blurforge/error.hpp"

namespace blurforge {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidInput: return "invalid input";
    case Errc::ShapeMismatch: return "shape mismatch";
    case Errc::MissingFile: return "missing file";
    case Errc::DimensionMismatch: return "dimension mismatch";
    case Errc::NotGrayscale: return "not grayscale";
    case Errc::IoError: return "i/o error";
    case Errc::ConfigError: return "config error";
    case Errc::EmptyInput: return "empty input";
  }
  return "unknown";
}

Image::Image(int h, int w, int c, double fill) : height(h), width(w), channels(c) {
  if (h < 0 || w < 0 || c < 0) fail(Errc::InvalidInput, "negative image dimension");
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

SaliencyMask::SaliencyMask(int h, int w, std::uint8_t fill) : height(h), width(w) {
  if (h < 0 || w < 0) fail(Errc::InvalidInput, "negative mask dimension");
  bits.assign(static_cast<std::size_t>(h) * w, fill ? 1 : 0);
}

std::size_t SaliencyMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool same_shape(const Image& a, const Image& b) {
  return a.height == b.height && a.width == b.width && a.channels == b.channels;
}

bool same_shape(const Image& img, const SaliencyMask& mask) {
  return img.height == mask.height && img.width == mask.width;
}

void require_valid(const Image& img, const char* what) {
  if (img.empty()) fail(Errc::InvalidInput, std::string(what) + ": zero-dimension image");
  if (img.data.size() != img.pixels() * static_cast<std::size_t>(img.channels)) {
    fail(Errc::InvalidInput, std::string(what) + ": data length does not match dimensions");
  }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!same_shape(a, b)) fail(Errc::ShapeMismatch, std::string(what) + ": image shapes differ");
}

void require_same_shape(const Image& img, const SaliencyMask& mask, const char* what) {
  if (!same_shape(img, mask)) fail(Errc::ShapeMismatch, std::string(what) + ": mask shape differs from image");
}

bool all_finite(const Image& img) {
  return std::all_of(img.data.begin(), img.data.end(), [](double v) { return std::isfinite(v); });
}

Image clamp01(Image img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace blurforge
