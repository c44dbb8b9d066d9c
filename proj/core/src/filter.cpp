#include "blurforge/filter.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "blurforge/error.hpp"

namespace blurforge {
namespace {

constexpr double kNormTolerance = 1e-6;

int pad_index(int i, int n, Padding padding) {
  if (i >= 0 && i < n) return i;
  if (padding == Padding::Zero) return -1;
  return i < 0 ? 0 : n - 1;
}

void check_taps(const std::vector<double>& taps, const char* what) {
  if (taps.empty() || taps.size() % 2 == 0) fail(Errc::InvalidInput, std::string(what) + ": kernel length must be odd");
  const double s = std::accumulate(taps.begin(), taps.end(), 0.0);
  if (std::abs(s - 1.0) > kNormTolerance) fail(Errc::InvalidInput, std::string(what) + ": kernel weights must sum to 1");
}

// 1-D correlation along one axis.
Image filter_axis(const Image& img, const std::vector<double>& taps, bool horizontal, Padding padding) {
  const int half = static_cast<int>(taps.size()) / 2;
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) {
          const double w = taps[k + half];
          if (horizontal) {
            const int xx = pad_index(x + k, img.width, padding);
            if (xx >= 0) acc += w * img.at(y, xx, c);
          } else {
            const int yy = pad_index(y + k, img.height, padding);
            if (yy >= 0) acc += w * img.at(yy, x, c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Kernel2D normalized(Kernel2D k) {
  const double s = k.sum();
  for (double& w : k.weights) w /= s;
  return k;
}

}  // namespace

double Kernel2D::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

Image conv2d_fixed(const Image& img, const Kernel2D& kernel, Padding padding) {
  require_valid(img, "conv2d_fixed");
  if (kernel.rows <= 0 || kernel.cols <= 0 || kernel.rows % 2 == 0 || kernel.cols % 2 == 0) {
    fail(Errc::InvalidInput, "conv2d_fixed: kernel dimensions must be odd");
  }
  if (kernel.weights.size() != static_cast<std::size_t>(kernel.rows) * kernel.cols) {
    fail(Errc::InvalidInput, "conv2d_fixed: kernel weight count does not match dimensions");
  }
  if (std::abs(kernel.sum() - 1.0) > kNormTolerance) fail(Errc::InvalidInput, "conv2d_fixed: kernel weights must sum to 1");

  const int hr = kernel.rows / 2;
  const int hc = kernel.cols / 2;
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int r = 0; r < kernel.rows; ++r) {
          const int yy = pad_index(y + r - hr, img.height, padding);
          if (yy < 0) continue;
          for (int q = 0; q < kernel.cols; ++q) {
            const int xx = pad_index(x + q - hc, img.width, padding);
            if (xx < 0) continue;
            acc += kernel.at(r, q) * img.at(yy, xx, c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Image conv2d_separable(const Image& img, const std::vector<double>& horizontal, const std::vector<double>& vertical,
                       Padding padding) {
  require_valid(img, "conv2d_separable");
  check_taps(horizontal, "conv2d_separable");
  check_taps(vertical, "conv2d_separable");
  return filter_axis(filter_axis(img, horizontal, true, padding), vertical, false, padding);
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(Errc::InvalidInput, "gaussian_kernel: sigma must be positive");
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * half + 1);
  for (int i = -half; i <= half; ++i) taps[i + half] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  const double s = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& w : taps) w /= s;
  return taps;
}

Kernel2D gaussian_kernel(double sigma) {
  const std::vector<double> taps = gaussian_kernel_1d(sigma);
  const int n = static_cast<int>(taps.size());
  Kernel2D k{n, n, std::vector<double>(static_cast<std::size_t>(n) * n)};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) k.weights[static_cast<std::size_t>(r) * n + c] = taps[r] * taps[c];
  return normalized(std::move(k));
}

Kernel2D disk_kernel(double diameter) {
  if (!(diameter >= 1.0) || !std::isfinite(diameter)) fail(Errc::InvalidInput, "disk_kernel: diameter must be >= 1");
  const double radius = diameter / 2.0;
  const int half = static_cast<int>(std::floor(radius));
  const int n = 2 * half + 1;
  Kernel2D k{n, n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (int r = -half; r <= half; ++r)
    for (int c = -half; c <= half; ++c)
      if (r * r + c * c <= radius * radius) k.weights[static_cast<std::size_t>(r + half) * n + (c + half)] = 1.0;
  return normalized(std::move(k));
}

}  // namespace blurforge
