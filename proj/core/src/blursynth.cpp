#include "blurforge/blursynth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "blurforge/binary_io.hpp"
#include "blurforge/error.hpp"
#include "blurforge/saliency.hpp"
#include "blurforge/warp.hpp"

namespace blurforge {
namespace fs = std::filesystem;

namespace {

double linf(Translation t) { return std::max(std::abs(t.tx), std::abs(t.ty)); }

bool all_zero(const Image& img) {
  return std::all_of(img.data.begin(), img.data.end(), [](double v) { return v == 0.0; });
}

}  // namespace

void MotionSpec::validate() const {
  if (n_steps < 1) fail(Errc::InvalidInput, "MotionSpec: n_steps must be >= 1");
  if (!(eps_theta >= 0.0 && eps_theta <= 1.0)) fail(Errc::InvalidInput, "MotionSpec: eps_theta must lie in [0, 1]");
  if (!(linf(theta_o) <= eps_theta) || !(linf(theta_b) <= eps_theta)) {
    fail(Errc::InvalidInput, "MotionSpec: translation exceeds eps_theta");
  }
}

Translation slot_translation(Translation theta, int slot, int n_steps) {
  return {theta.tx * slot / n_steps, theta.ty * slot / n_steps};
}

int kernel_support(double eps, int n_steps) {
  if (!std::isfinite(eps)) fail(Errc::InvalidInput, "kernel_support: eps must be finite");
  const double m = std::floor(eps);
  if (m < 1.0) return 1;
  if (m > n_steps) return n_steps;
  return static_cast<int>(m);
}

SubMotionStack build_stack(const Image& img, const SaliencyMask& mask, const MotionSpec& spec, int depth) {
  require_valid(img, "build_stack");
  require_same_shape(img, mask, "build_stack");
  spec.validate();
  if (depth <= 0 || depth > spec.n_steps) depth = spec.n_steps;

  SubMotionStack stack;
  stack.n_steps = spec.n_steps;
  RegionLayers layers = region_split(img, mask);
  stack.object_layer = std::move(layers.object);
  stack.background_layer = std::move(layers.background);

  stack.slices.reserve(depth);
  for (int i = 0; i < depth; ++i) {
    Image slice = translate(stack.object_layer, slot_translation(spec.theta_o, i, spec.n_steps), spec.padding);
    const Image moved_bg =
        translate(stack.background_layer, slot_translation(spec.theta_b, i, spec.n_steps), spec.padding);
    for (std::size_t k = 0; k < slice.data.size(); ++k) slice.data[k] += moved_bg.data[k];
    stack.slices.push_back(std::move(slice));
  }
  return stack;
}

// ---------------------------------------------------------------------------
// KernelField

KernelField KernelField::per_pixel(int height, int width, int support) {
  if (height <= 0 || width <= 0 || support < 1) fail(Errc::InvalidInput, "KernelField: invalid dimensions");
  KernelField k;
  k.mode_ = KernelMode::PerPixel;
  k.support_ = support;
  k.height_ = height;
  k.width_ = width;
  k.logits_.assign(static_cast<std::size_t>(height) * width * support, 0.0);
  return k;
}

KernelField KernelField::per_region(const SaliencyMask& mask, int support) {
  if (mask.height <= 0 || mask.width <= 0 || support < 1) fail(Errc::InvalidInput, "KernelField: invalid dimensions");
  KernelField k;
  k.mode_ = KernelMode::PerRegion;
  k.support_ = support;
  k.height_ = mask.height;
  k.width_ = mask.width;
  k.logits_.assign(2 * static_cast<std::size_t>(support), 0.0);
  k.mask_ = mask;
  return k;
}

void KernelField::fill(std::span<const double> values) {
  if (static_cast<int>(values.size()) != support_) fail(Errc::InvalidInput, "KernelField::fill: wrong vector length");
  for (int v = 0; v < vector_count(); ++v) std::copy(values.begin(), values.end(), vector(v).begin());
}

void KernelField::fill_center(double center_logit) {
  std::vector<double> v(support_, 0.0);
  v[0] = center_logit;
  fill(v);
}

void softmax_weights(std::span<const double> logits, std::span<double> out) {
  double m = -std::numeric_limits<double>::infinity();
  for (double z : logits) m = std::max(m, z);
  if (!std::isfinite(m)) fail(Errc::InvalidInput, "softmax_weights: no finite logit");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += (out[i] = std::exp(logits[i] - m));
  for (double& w : out) w /= s;
}

std::vector<double> KernelField::weights() const {
  std::vector<double> w(logits_.size());
  for (int v = 0; v < vector_count(); ++v) {
    const std::size_t off = static_cast<std::size_t>(v) * support_;
    softmax_weights(vector(v), std::span<double>(w.data() + off, support_));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

void check_pairing(const SubMotionStack& stack, const KernelField& kernel, const char* what) {
  if (stack.slices.empty()) fail(Errc::InvalidInput, std::string(what) + ": empty stack");
  if (kernel.support() < 1) fail(Errc::InvalidInput, std::string(what) + ": empty kernel field");
  if (kernel.support() > stack.depth()) {
    fail(Errc::InvalidInput, std::string(what) + ": kernel support exceeds stack depth");
  }
  const Image& s0 = stack.slices.front();
  if (kernel.height() != s0.height || kernel.width() != s0.width) {
    fail(Errc::ShapeMismatch, std::string(what) + ": kernel field does not match the stack");
  }
  if (kernel.mode() == KernelMode::PerRegion && !same_shape(s0, kernel.mask())) {
    fail(Errc::ShapeMismatch, std::string(what) + ": region kernel has no matching mask");
  }
}

}  // namespace

Image synthesize(const SubMotionStack& stack, const KernelField& kernel) {
  check_pairing(stack, kernel, "synthesize");
  const Image& s0 = stack.slices.front();
  const int m = kernel.support();
  const std::vector<double> weights = kernel.weights();

  Image out(s0.height, s0.width, s0.channels);
  for (int y = 0; y < s0.height; ++y) {
    for (int x = 0; x < s0.width; ++x) {
      const double* w = weights.data() + static_cast<std::size_t>(kernel.vector_index(y, x)) * m;
      for (int c = 0; c < s0.channels; ++c) {
        const std::size_t idx = s0.index(y, x, c);
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
          if (w[i] != 0.0) acc += w[i] * stack.slices[i].data[idx];
        out.data[idx] = acc;
      }
    }
  }
  return out;
}

SynthesisGrad synthesize_grad(const SubMotionStack& stack, const KernelField& kernel, const MotionSpec& spec,
                              const Image& upstream) {
  check_pairing(stack, kernel, "synthesize_grad");
  const Image& s0 = stack.slices.front();
  require_same_shape(s0, upstream, "synthesize_grad");
  const int m = kernel.support();
  const std::vector<double> weights = kernel.weights();

  SynthesisGrad grad;
  grad.dweights.assign(weights.size(), 0.0);
  grad.dlogits.assign(weights.size(), 0.0);

  for (int y = 0; y < s0.height; ++y) {
    for (int x = 0; x < s0.width; ++x) {
      double* dw = grad.dweights.data() + static_cast<std::size_t>(kernel.vector_index(y, x)) * m;
      for (int c = 0; c < s0.channels; ++c) {
        const std::size_t idx = s0.index(y, x, c);
        const double u = upstream.data[idx];
        if (u == 0.0) continue;
        for (int i = 0; i < m; ++i) dw[i] += u * stack.slices[i].data[idx];
      }
    }
  }

  // Softmax Jacobian: dz_j = w_j (g_j - <w, g>).
  for (int v = 0; v < kernel.vector_count(); ++v) {
    const std::size_t off = static_cast<std::size_t>(v) * m;
    double dot = 0.0;
    for (int i = 0; i < m; ++i) dot += weights[off + i] * grad.dweights[off + i];
    for (int i = 0; i < m; ++i) grad.dlogits[off + i] = weights[off + i] * (grad.dweights[off + i] - dot);
  }

  // Slot i moves each layer by i * theta / N; slot 0 contributes nothing.
  const bool object_empty = all_zero(stack.object_layer);
  const bool background_empty = all_zero(stack.background_layer);
  Image weighted(s0.height, s0.width, s0.channels);
  for (int i = 1; i < m; ++i) {
    bool any = false;
    for (int y = 0; y < s0.height; ++y) {
      for (int x = 0; x < s0.width; ++x) {
        const double w = weights[static_cast<std::size_t>(kernel.vector_index(y, x)) * m + i];
        any = any || w != 0.0;
        for (int c = 0; c < s0.channels; ++c) {
          const std::size_t idx = s0.index(y, x, c);
          weighted.data[idx] = upstream.data[idx] * w;
        }
      }
    }
    if (!any) continue;
    const double coeff = static_cast<double>(i) / spec.n_steps;
    if (!object_empty) {
      const TranslationGrad g = translate_grad(stack.object_layer, slot_translation(spec.theta_o, i, spec.n_steps),
                                               weighted, spec.padding);
      grad.dtheta_o.tx += coeff * g.dtx;
      grad.dtheta_o.ty += coeff * g.dty;
    }
    if (!background_empty) {
      const TranslationGrad g = translate_grad(
          stack.background_layer, slot_translation(spec.theta_b, i, spec.n_steps), weighted, spec.padding);
      grad.dtheta_b.tx += coeff * g.dtx;
      grad.dtheta_b.ty += coeff * g.dty;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Projections

void project_center(std::span<double> logits) {
  if (logits.empty()) return;
  const double top = *std::max_element(logits.begin(), logits.end());
  if (top > logits[0]) logits[0] = top;
}

KernelField project_kernel(KernelField kernel) {
  for (int v = 0; v < kernel.vector_count(); ++v) project_center(kernel.vector(v));
  return kernel;
}

Translation project_translation(Translation t, double eps_theta) {
  return {std::clamp(t.tx, -eps_theta, eps_theta), std::clamp(t.ty, -eps_theta, eps_theta)};
}

bool kernel_feasible(const KernelField& kernel, double tol) {
  const std::vector<double> w = kernel.weights();
  const int m = kernel.support();
  for (int v = 0; v < kernel.vector_count(); ++v) {
    const double* wv = w.data() + static_cast<std::size_t>(v) * m;
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      if (!(wv[i] >= 0.0) || wv[i] > wv[0]) return false;
      sum += wv[i];
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Serialization

void write_kernel_field(const fs::path& path, const KernelField& kernel) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open " + path.string() + " for writing");
  binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(kernel.mode()));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(kernel.support()));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(kernel.height()));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(kernel.width()));
  binary::put_doubles(out, kernel.logits().data(), kernel.logits().size());
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

KernelField read_kernel_field(const fs::path& path, const SaliencyMask* mask) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(fs::exists(path) ? Errc::IoError : Errc::MissingFile, "cannot open " + path.string());
  const auto mode = binary::get<std::uint8_t>(in);
  const auto m = static_cast<int>(binary::get<std::uint32_t>(in));
  const auto h = static_cast<int>(binary::get<std::uint32_t>(in));
  const auto w = static_cast<int>(binary::get<std::uint32_t>(in));
  if (m < 1 || h < 1 || w < 1 || h > (1 << 16) || w > (1 << 16) || m > (1 << 16)) {
    fail(Errc::IoError, "corrupt kernel field header in " + path.string());
  }
  KernelField kernel;
  if (mode == static_cast<std::uint8_t>(KernelMode::PerPixel)) {
    kernel = KernelField::per_pixel(h, w, m);
  } else if (mode == static_cast<std::uint8_t>(KernelMode::PerRegion)) {
    if (!mask) fail(Errc::InvalidInput, "read_kernel_field: region kernel needs its mask");
    if (mask->height != h || mask->width != w) fail(Errc::ShapeMismatch, "read_kernel_field: mask shape mismatch");
    kernel = KernelField::per_region(*mask, m);
  } else {
    fail(Errc::IoError, "unknown kernel mode in " + path.string());
  }
  binary::get_doubles(in, kernel.logits().data(), kernel.logits().size());
  return kernel;
}

}  // namespace blurforge
