#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blurforge/blursynth.hpp"
#include "blurforge/image.hpp"
#include "blurforge/model.hpp"

namespace blurforge {

/// Pixel: independent kernel per pixel, one shared translation.
/// Obj / Bg: blur only the object (background) region; the other region
///   keeps an exact delta kernel and zero translation.
/// ImageWide: one kernel and one translation for the whole image.
/// Full: one kernel per region and independent object/background motion.
enum class Variant { Pixel, Obj, Bg, ImageWide, Full };

const char* to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

/// Parameter space of the kernel ascent step. Weights: sign step on the
/// softmax weights followed by a Euclidean simplex projection, stored back
/// as log-weights. Logits: sign step directly on the logits.
enum class KernelStep { Weights, Logits };

struct IterationState {
  int iteration = 0;
  const KernelField* kernel = nullptr;
  Translation theta_o;
  Translation theta_b;
  double loss = 0.0;
};
using IterationObserver = std::function<void(const IterationState&)>;

struct AttackConfig {
  Variant variant = Variant::Full;
  double eps = 15.0;
  double eps_theta = 0.4;
  int n_steps = 51;
  int iterations = 10;
  double step_kernel = 0.04;
  double step_theta_px = 1.5;  // pixels per iteration, converted to a rate per axis
  double mu = 1.0;
  std::uint64_t seed = 0;
  bool early_stop = true;
  Padding padding = Padding::Zero;
  KernelStep kernel_step = KernelStep::Weights;
  double init_center_logit = 10.0;
  /// Held constant instead of optimized when set (motion-direction sweeps).
  std::optional<Translation> fixed_theta_o;
  std::optional<Translation> fixed_theta_b;
  /// Called after every parameter update with the projected state.
  IterationObserver observer;

  void validate() const;
};

struct KernelSummary {
  KernelMode mode = KernelMode::PerRegion;
  std::vector<double> object_weights;      // PerRegion only
  std::vector<double> background_weights;  // PerRegion only
  double mean_center_weight = 1.0;
  double min_center_weight = 1.0;
};

struct AttackReport {
  std::string id;
  int label = 0;
  int clean_prediction = 0;
  int final_prediction = 0;
  bool success = false;
  std::vector<double> loss_trace;
  int iterations_used = 0;
  double final_loss = 0.0;
  Translation theta_o;
  Translation theta_b;
  KernelSummary kernel;
};

struct AttackResult {
  Image adversarial;
  AttackReport report;
  KernelField kernel;
};

/// Motion-blur attack: momentum sign ascent on the kernels and translations
/// with projection onto the feasible set after every step. Stops early once
/// the model is fooled when cfg.early_stop is set.
AttackResult abba_attack(const Classifier& model, const Image& img, int label, const SaliencyMask& mask,
                         const AttackConfig& cfg);

/// Translation on the boundary of the eps_theta L-inf ball pointing at
/// `degrees` (0 = +x, 90 = +y in image rows).
Translation direction_translation(double degrees, double eps_theta);

// ---------------------------------------------------------------------------
// Baselines

/// img + eps_a * sign(grad), clamped to [0, 1].
Image fgsm(const Classifier& model, const Image& img, int label, double eps_a);

/// Iterative sign ascent with L1-normalized momentum, step eps_a/iterations,
/// projected to the eps_a L-inf ball and [0, 1] each step.
Image mifgsm(const Classifier& model, const Image& img, int label, double eps_a, int iterations, double mu = 1.0);

enum class BlurKind { Gauss, Defocus };
enum class BlurRegion { Whole, Obj, Bg };

/// Gaussian (sigma = size) or defocus (disk diameter = size) blur, applied to
/// the whole image or only inside one region.
Image blur_baseline(const Image& img, const SaliencyMask& mask, BlurKind kind, double size = 15.0,
                    BlurRegion region = BlurRegion::Whole);

/// Fraction of images whose prediction differs from the label, per model.
std::vector<double> evaluate(const std::vector<const Classifier*>& models, const std::vector<Image>& adversarial,
                             const std::vector<int>& labels);

}  // namespace blurforge
