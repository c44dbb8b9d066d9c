#include "blurforge/physical.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "attack_loop.hpp"
#include "blurforge/error.hpp"
#include "blurforge/warp.hpp"

namespace blurforge {

PhysicalResult physical_attack(const Classifier& model, const Image& img, int label, const AttackConfig& cfg) {
  cfg.validate();
  require_input(model, img, "physical_attack");
  require_label(model, label, "physical_attack");

  // An all-object mask makes the shared translation act on the whole frame.
  const SaliencyMask whole(img.height, img.width, 1);
  detail::LoopPlan plan;
  plan.mask = whole;
  plan.kernel = KernelField::per_region(whole, cfg.n_steps);
  plan.trainable = {0, 0};
  plan.center_dominance = false;
  plan.theta_mode = detail::ThetaMode::Shared;

  detail::LoopResult loop = detail::run_attack_loop(model, img, label, std::move(plan), cfg);
  PhysicalResult out;
  out.theta = loop.report.theta_o;
  out.adversarial = std::move(loop.adversarial);
  out.report = std::move(loop.report);
  return out;
}

CameraMotion camera_translation(Translation theta, int image_height, int image_width, double depth_m,
                                const CameraIntrinsics& k) {
  if (!(depth_m > 0.0) || !std::isfinite(depth_m)) fail(Errc::InvalidInput, "camera_translation: depth must be positive");
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) fail(Errc::InvalidInput, "camera_translation: focal lengths must be positive");
  if (image_height <= 0 || image_width <= 0) fail(Errc::InvalidInput, "camera_translation: invalid image size");
  const double u = theta.tx * image_width;
  const double v = theta.ty * image_height;
  return {u * depth_m / k.fx, v * depth_m / k.fy};
}

Image simulate_capture(const Image& img, Translation theta, int n_frames, Padding padding) {
  require_valid(img, "simulate_capture");
  if (n_frames < 1) fail(Errc::InvalidInput, "simulate_capture: n_frames must be >= 1");
  const double weight = 1.0 / n_frames;
  Image out(img.height, img.width, img.channels, 0.0);
  for (int i = 0; i < n_frames; ++i) {
    const Image frame = translate(img, slot_translation(theta, i, n_frames), padding);
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += weight * frame.data[k];
  }
  return out;
}

double object_depth(const Image& depth_map, const SaliencyMask& mask) {
  require_valid(depth_map, "object_depth");
  require_same_shape(depth_map, mask, "object_depth");
  std::vector<double> values;
  const bool use_mask = mask.count() > 0;
  for (std::size_t p = 0; p < depth_map.pixels(); ++p)
    if (!use_mask || mask.bits[p]) values.push_back(depth_map.data[p * depth_map.channels]);
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace blurforge
