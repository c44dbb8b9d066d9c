#include "blurforge/saliency.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <queue>
#include <vector>

#include "blurforge/error.hpp"
#include "blurforge/filter.hpp"
#include "blurforge/image_io.hpp"

namespace blurforge {
namespace fs = std::filesystem;

namespace {

constexpr double kSmoothingSigma = 2.5;
constexpr int kMinSide = 8;

// FFTW planning is not thread-safe; execution on a private plan is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> fft2(std::vector<std::complex<double>> data, int h, int w, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(h, w, buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return data;
}

// Labels 4-connected components of `on` pixels; returns labels (-1 = off)
// and the size of each component.
std::vector<int> label_components(const std::vector<std::uint8_t>& on, int h, int w, std::vector<std::size_t>& sizes) {
  std::vector<int> label(on.size(), -1);
  sizes.clear();
  std::queue<int> frontier;
  for (int start = 0; start < h * w; ++start) {
    if (!on[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    label[start] = id;
    frontier.push(start);
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop();
      ++sizes[id];
      const int y = p / w;
      const int x = p % w;
      const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (on[q] && label[q] < 0) {
          label[q] = id;
          frontier.push(q);
        }
      }
    }
  }
  return label;
}

SaliencyMask largest_component_filled(const std::vector<std::uint8_t>& on, int h, int w) {
  std::vector<std::size_t> sizes;
  const std::vector<int> label = label_components(on, h, w, sizes);
  SaliencyMask mask(h, w, 0);
  if (sizes.empty()) return mask;
  int best = 0;
  for (int i = 1; i < static_cast<int>(sizes.size()); ++i)
    if (sizes[i] > sizes[best]) best = i;
  for (std::size_t p = 0; p < on.size(); ++p) mask.bits[p] = label[p] == best ? 1 : 0;

  // Fill holes: background components that do not touch the border.
  std::vector<std::uint8_t> off(on.size());
  for (std::size_t p = 0; p < on.size(); ++p) off[p] = mask.bits[p] ? 0 : 1;
  std::vector<std::size_t> hole_sizes;
  const std::vector<int> hole_label = label_components(off, h, w, hole_sizes);
  std::vector<std::uint8_t> touches_border(hole_sizes.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y != 0 && y != h - 1 && x != 0 && x != w - 1) continue;
      const int l = hole_label[static_cast<std::size_t>(y) * w + x];
      if (l >= 0) touches_border[l] = 1;
    }
  }
  for (std::size_t p = 0; p < on.size(); ++p)
    if (hole_label[p] >= 0 && !touches_border[hole_label[p]]) mask.bits[p] = 1;
  return mask;
}

}  // namespace

SaliencyMask load_mask(const fs::path& path, int expected_height, int expected_width) {
  if (!fs::exists(path)) fail(Errc::MissingFile, "mask not found: " + path.string());
  const Image img = read_png(path);
  if (img.channels != 1) fail(Errc::NotGrayscale, "mask is not grayscale: " + path.string());
  if (img.height != expected_height || img.width != expected_width) {
    fail(Errc::DimensionMismatch, "mask dimensions differ from image: " + path.string());
  }
  SaliencyMask mask(img.height, img.width);
  for (std::size_t p = 0; p < mask.bits.size(); ++p) mask.bits[p] = quantize(img.data[p]) >= 128 ? 1 : 0;
  return mask;
}

void save_mask(const fs::path& path, const SaliencyMask& mask) {
  Image img(mask.height, mask.width, 1);
  for (std::size_t p = 0; p < mask.bits.size(); ++p) img.data[p] = mask.bits[p] ? 1.0 : 0.0;
  write_png(path, img);
}

SaliencyMask centered_box(int height, int width) {
  SaliencyMask mask(height, width, 0);
  const int y0 = height / 4;
  const int x0 = width / 4;
  const int y1 = y0 + std::max(1, height / 2);
  const int x1 = x0 + std::max(1, width / 2);
  for (int y = y0; y < y1 && y < height; ++y)
    for (int x = x0; x < x1 && x < width; ++x) mask.at(y, x) = 1;
  return mask;
}

bool is_degenerate(const SaliencyMask& mask) {
  const std::size_t n = mask.count();
  return n == 0 || n == mask.bits.size();
}

SaliencyMask ensure_nondegenerate(SaliencyMask mask) {
  if (is_degenerate(mask)) return centered_box(mask.height, mask.width);
  return mask;
}

SaliencyMask spectral_residual(const Image& img, double threshold_factor) {
  require_valid(img, "spectral_residual");
  if (img.height < kMinSide || img.width < kMinSide) {
    fail(Errc::InvalidInput, "spectral_residual: image must be at least 8x8");
  }
  const int h = img.height;
  const int w = img.width;
  const std::size_t n = img.pixels();

  std::vector<std::complex<double>> spectrum(n);
  double mean = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double g = 0.0;
    for (int c = 0; c < img.channels; ++c) g += img.data[p * img.channels + c];
    g /= img.channels;
    spectrum[p] = g;
    mean += g;
  }
  mean /= static_cast<double>(n);
  double variance = 0.0;
  for (const auto& v : spectrum) variance += (v.real() - mean) * (v.real() - mean);
  if (variance / static_cast<double>(n) < 1e-12) return centered_box(h, w);

  spectrum = fft2(std::move(spectrum), h, w, FFTW_FORWARD);

  std::vector<double> log_amp(n);
  for (std::size_t k = 0; k < n; ++k) log_amp[k] = std::log(std::abs(spectrum[k]) + 1e-12);

  // Spectral residual; the DC bin takes no part so that a constant offset
  // of the input leaves the result unchanged.
  std::vector<std::complex<double>> residual(n, 0.0);
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      if (ky == 0 && kx == 0) continue;
      double acc = 0.0;
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = (ky + dy + h) % h;
          const int xx = (kx + dx + w) % w;
          if (yy == 0 && xx == 0) continue;
          acc += log_amp[static_cast<std::size_t>(yy) * w + xx];
          ++count;
        }
      }
      const std::size_t k = static_cast<std::size_t>(ky) * w + kx;
      const double r = log_amp[k] - acc / count;
      residual[k] = std::polar(std::exp(r), std::arg(spectrum[k]));
    }
  }
  residual = fft2(std::move(residual), h, w, FFTW_BACKWARD);

  Image saliency(h, w, 1);
  for (std::size_t p = 0; p < n; ++p) saliency.data[p] = std::norm(residual[p]);
  const std::vector<double> taps = gaussian_kernel_1d(kSmoothingSigma);
  saliency = conv2d_separable(saliency, taps, taps, Padding::Replicate);

  double s_mean = 0.0;
  double s_min = saliency.data[0];
  double s_max = saliency.data[0];
  for (double v : saliency.data) {
    s_mean += v;
    s_min = std::min(s_min, v);
    s_max = std::max(s_max, v);
  }
  s_mean /= static_cast<double>(n);
  if (!(s_max - s_min > 1e-12 * std::max(1.0, s_max))) return centered_box(h, w);

  const double threshold = threshold_factor * s_mean;
  std::vector<std::uint8_t> on(n);
  for (std::size_t p = 0; p < n; ++p) on[p] = saliency.data[p] > threshold ? 1 : 0;
  return ensure_nondegenerate(largest_component_filled(on, h, w));
}

RegionLayers region_split(const Image& img, const SaliencyMask& mask) {
  require_valid(img, "region_split");
  require_same_shape(img, mask, "region_split");
  RegionLayers layers{Image(img.height, img.width, img.channels), Image(img.height, img.width, img.channels)};
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    Image& dst = mask.bits[p] ? layers.object : layers.background;
    for (int c = 0; c < img.channels; ++c) {
      const std::size_t i = p * img.channels + c;
      dst.data[i] = img.data[i];
    }
  }
  return layers;
}

}  // namespace blurforge
