#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "blurforge/image.hpp"

namespace blurforge {

/// Object/background motion of one exposure. Slot i of the sub-motion stack
/// is translated by i * theta / n_steps, so slot 0 is the unmoved image.
struct MotionSpec {
  Translation theta_o;
  Translation theta_b;
  int n_steps = 51;
  double eps_theta = 1.0;
  Padding padding = Padding::Zero;

  void validate() const;
};

Translation slot_translation(Translation theta, int slot, int n_steps);

/// Number of kernel slots for bound eps: floor(eps) clamped to [1, n_steps].
int kernel_support(double eps, int n_steps);

struct SubMotionStack {
  std::vector<Image> slices;
  Image object_layer;
  Image background_layer;
  int n_steps = 1;

  int depth() const { return static_cast<int>(slices.size()); }
};

/// Builds slices 0..depth-1 (depth <= 0 means all n_steps):
/// slice_i = T(img * S, i theta_o / N) + T(img * (1 - S), i theta_b / N).
SubMotionStack build_stack(const Image& img, const SaliencyMask& mask, const MotionSpec& spec, int depth = 0);

enum class KernelMode : std::uint8_t { PerPixel = 0, PerRegion = 1 };

inline constexpr int kObjectRegion = 0;
inline constexpr int kBackgroundRegion = 1;

/// Logit vectors over `support` slots; softmax gives the convex blur
/// weights. PerPixel holds one vector per pixel (row-major), PerRegion holds
/// two (object, background) resolved through the stored mask.
class KernelField {
 public:
  KernelField() = default;

  static KernelField per_pixel(int height, int width, int support);
  static KernelField per_region(const SaliencyMask& mask, int support);

  KernelMode mode() const { return mode_; }
  int support() const { return support_; }
  int height() const { return height_; }
  int width() const { return width_; }
  const SaliencyMask& mask() const { return mask_; }

  int vector_count() const { return support_ == 0 ? 0 : static_cast<int>(logits_.size()) / support_; }
  /// Logit vector used by pixel (y, x).
  int vector_index(int y, int x) const {
    if (mode_ == KernelMode::PerPixel) return y * width_ + x;
    return mask_.at(y, x) ? kObjectRegion : kBackgroundRegion;
  }

  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }
  std::span<double> vector(int v) { return {logits_.data() + static_cast<std::size_t>(v) * support_, static_cast<std::size_t>(support_)}; }
  std::span<const double> vector(int v) const {
    return {logits_.data() + static_cast<std::size_t>(v) * support_, static_cast<std::size_t>(support_)};
  }

  /// Sets every vector to `values` (length = support).
  void fill(std::span<const double> values);
  /// All weight on slot 0, logits (big, 0, ..., 0).
  void fill_center(double center_logit);

  /// Softmax weights of every vector, same layout as logits().
  std::vector<double> weights() const;

  friend bool operator==(const KernelField&, const KernelField&) = default;

 private:
  KernelMode mode_ = KernelMode::PerPixel;
  int support_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> logits_;
  SaliencyMask mask_;
};

/// Softmax of one logit vector. Entries at -infinity get weight exactly 0.
void softmax_weights(std::span<const double> logits, std::span<double> out);

/// X_adv(p) = sum_{i < m} weights(p)[i] * slice_i(p).
Image synthesize(const SubMotionStack& stack, const KernelField& kernel);

struct SynthesisGrad {
  std::vector<double> dlogits;   // layout of KernelField::logits()
  std::vector<double> dweights;  // gradient w.r.t. the softmax weights, same layout
  Translation dtheta_o;
  Translation dtheta_b;
};

/// Gradient of <upstream, synthesize(stack, kernel)> w.r.t. the kernel
/// logits/weights and both translations. `spec` must be the one the stack
/// was built with.
SynthesisGrad synthesize_grad(const SubMotionStack& stack, const KernelField& kernel, const MotionSpec& spec,
                              const Image& upstream);

/// Center dominance: lifts logit 0 to the vector maximum. Idempotent.
KernelField project_kernel(KernelField kernel);
void project_center(std::span<double> logits);

/// Component-wise clamp to [-eps_theta, eps_theta].
Translation project_translation(Translation t, double eps_theta);

/// Every vector's weights sum to 1 within tol and slot 0 carries the largest weight.
bool kernel_feasible(const KernelField& kernel, double tol = 1e-9);

/// Header mode:u8, m:u32, H:u32, W:u32, then the float64 logits. PerRegion
/// fields need the mask they were built on when read back.
void write_kernel_field(const std::filesystem::path& path, const KernelField& kernel);
KernelField read_kernel_field(const std::filesystem::path& path, const SaliencyMask* mask = nullptr);

}  // namespace blurforge
