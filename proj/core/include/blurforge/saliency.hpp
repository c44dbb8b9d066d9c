#pragma once

#include <filesystem>
#include <utility>

#include "blurforge/image.hpp"

namespace blurforge {

/// Loads an 8-bit grayscale PNG mask; bytes >= 128 mark the object.
/// Errors: MissingFile, DimensionMismatch, NotGrayscale.
SaliencyMask load_mask(const std::filesystem::path& path, int expected_height, int expected_width);
void save_mask(const std::filesystem::path& path, const SaliencyMask& mask);

/// Classical spectral-residual saliency, binarized at
/// threshold_factor * mean saliency and reduced to its largest 4-connected
/// component (holes filled). Falls back to centered_box() when the result
/// has no object or no background.
SaliencyMask spectral_residual(const Image& img, double threshold_factor = 3.0);

/// Central 50% x 50% rectangle.
SaliencyMask centered_box(int height, int width);

/// Replaces a mask with an empty object or empty background by centered_box().
SaliencyMask ensure_nondegenerate(SaliencyMask mask);
bool is_degenerate(const SaliencyMask& mask);

struct RegionLayers {
  Image object;
  Image background;
};

/// object = img * S, background = img * (1 - S); the two sum to img exactly.
RegionLayers region_split(const Image& img, const SaliencyMask& mask);

}  // namespace blurforge
