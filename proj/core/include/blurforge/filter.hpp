#pragma once

#include <vector>

#include "blurforge/image.hpp"

namespace blurforge {

/// Row-major 2-D weight grid with odd side lengths.
struct Kernel2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> weights;

  double at(int r, int c) const { return weights[static_cast<std::size_t>(r) * cols + c]; }
  double sum() const;
};

/// Spatial correlation with a normalized fixed kernel; output keeps the
/// input shape.
Image conv2d_fixed(const Image& img, const Kernel2D& kernel, Padding padding = Padding::Replicate);

/// Same as conv2d_fixed for the outer-product kernel vertical x horizontal,
/// done in two 1-D passes.
Image conv2d_separable(const Image& img, const std::vector<double>& horizontal,
                       const std::vector<double>& vertical, Padding padding = Padding::Replicate);

/// Normalized sampled Gaussian truncated at +-ceil(3 sigma).
std::vector<double> gaussian_kernel_1d(double sigma);
Kernel2D gaussian_kernel(double sigma);

/// Normalized disk indicator; side length is 2*floor(diameter/2)+1.
Kernel2D disk_kernel(double diameter);

}  // namespace blurforge
