#pragma once

#include <optional>
#include <vector>

#include "blurforge/image.hpp"
#include "blurforge/model.hpp"

namespace blurforge {

/// Relative drop of the success rate after deblurring, r = (s - s') / s.
/// Empty when s == 0.
std::optional<double> deblur_resilience(double success_before, double success_after);

struct InterpretOptions {
  double lambda_l1 = 0.05;
  double lambda_tv = 0.2;
  int iterations = 150;
  double lr = 0.1;
  double init = 0.5;
};

struct InterpretResult {
  Image mask;                      // H x W x 1, values in [0, 1]
  std::vector<double> objective;   // value before each step, then the final value
};

/// Minimizes p_y(M * x_adv + (1 - M) * x_real) + l1 * |M|_1 / HW + tv * TV(M) / HW
/// by projected (sub)gradient descent; TV is anisotropic forward differences.
InterpretResult interpretable_map(const Classifier& model, const Image& x_adv, const Image& x_real, int label,
                                  const InterpretOptions& options = {});

/// Objective of interpretable_map at a given mask.
double interpret_objective(const Classifier& model, const Image& x_adv, const Image& x_real, int label,
                           const Image& mask, const InterpretOptions& options = {});

/// 1 - mean per-pixel population std across maps / 0.5.
double consistency(const std::vector<Image>& maps);

/// Best non-true-class probability minus true-class probability.
double transferability_score(const Classifier& model, const Image& x_adv, int label);

}  // namespace blurforge
