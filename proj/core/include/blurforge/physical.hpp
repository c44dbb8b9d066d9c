#pragma once

#include <filesystem>

#include "blurforge/attack.hpp"
#include "blurforge/image.hpp"
#include "blurforge/model.hpp"

namespace blurforge {

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 0.0;
  double cy = 0.0;
};

struct PhysicalResult {
  Image adversarial;
  Translation theta;
  AttackReport report;
};

/// Camera-motion attack: kernels fixed to the uniform average over all
/// n_steps slots, one translation shared by object and background. Only
/// the translation is optimized; center dominance does not apply.
/// cfg.variant, eps and step_kernel are ignored.
PhysicalResult physical_attack(const Classifier& model, const Image& img, int label, const AttackConfig& cfg);

struct CameraMotion {
  double x_m = 0.0;
  double y_m = 0.0;
};

/// Pinhole model, camera moving parallel to the image plane:
/// X = (tx * W) * depth / fx, Y = (ty * H) * depth / fy.
CameraMotion camera_translation(Translation theta, int image_height, int image_width, double depth_m,
                                const CameraIntrinsics& k);

/// Straight-line exposure: mean of translate(img, i * theta / N), i < N.
Image simulate_capture(const Image& img, Translation theta, int n_frames, Padding padding = Padding::Zero);

/// Median of a single-channel depth map over the object region (the whole
/// map when the mask selects nothing).
double object_depth(const Image& depth_map, const SaliencyMask& mask);

}  // namespace blurforge
