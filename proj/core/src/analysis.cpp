#include "blurforge/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "blurforge/error.hpp"

namespace blurforge {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Image blend(const Image& x_adv, const Image& x_real, const Image& mask) {
  Image out = x_real;
  for (std::size_t p = 0; p < x_real.pixels(); ++p) {
    const double m = mask.data[p];
    for (int c = 0; c < x_real.channels; ++c) {
      const std::size_t i = p * x_real.channels + c;
      out.data[i] = m * x_adv.data[i] + (1.0 - m) * x_real.data[i];
    }
  }
  return out;
}

// Both penalties are averaged over pixels.
double total_variation(const Image& m) {
  double tv = 0.0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (x + 1 < m.width) tv += std::abs(m.at(y, x + 1, 0) - m.at(y, x, 0));
      if (y + 1 < m.height) tv += std::abs(m.at(y + 1, x, 0) - m.at(y, x, 0));
    }
  }
  return tv / static_cast<double>(m.pixels());
}

double l1_norm(const Image& m) {
  double s = 0.0;
  for (double v : m.data) s += std::abs(v);
  return s / static_cast<double>(m.pixels());
}

double true_class_probability(const std::vector<double>& logits, int label) { return softmax(logits)[label]; }

void check_pair(const Classifier& model, const Image& x_adv, const Image& x_real, int label, const char* what) {
  require_input(model, x_adv, what);
  require_same_shape(x_adv, x_real, what);
  require_label(model, label, what);
}

}  // namespace

std::optional<double> deblur_resilience(double success_before, double success_after) {
  if (!(success_before >= 0.0 && success_before <= 1.0) || !(success_after >= 0.0 && success_after <= 1.0)) {
    fail(Errc::InvalidInput, "deblur_resilience: rates must lie in [0, 1]");
  }
  if (success_before == 0.0) return std::nullopt;
  return (success_before - success_after) / success_before;
}

double interpret_objective(const Classifier& model, const Image& x_adv, const Image& x_real, int label,
                           const Image& mask, const InterpretOptions& options) {
  check_pair(model, x_adv, x_real, label, "interpret_objective");
  if (mask.height != x_real.height || mask.width != x_real.width || mask.channels != 1) {
    fail(Errc::ShapeMismatch, "interpret_objective: mask must be H x W x 1");
  }
  const double fy = true_class_probability(model.forward(blend(x_adv, x_real, mask)), label);
  return fy + options.lambda_l1 * l1_norm(mask) + options.lambda_tv * total_variation(mask);
}

InterpretResult interpretable_map(const Classifier& model, const Image& x_adv, const Image& x_real, int label,
                                  const InterpretOptions& options) {
  check_pair(model, x_adv, x_real, label, "interpretable_map");
  if (options.iterations < 0) fail(Errc::InvalidInput, "interpretable_map: negative iteration count");

  InterpretResult result;
  Image& m = result.mask;
  m = Image(x_real.height, x_real.width, 1, std::clamp(options.init, 0.0, 1.0));
  const int h = m.height;
  const int w = m.width;
  const int ch = x_real.channels;

  Image grad(h, w, 1);
  const double l1 = options.lambda_l1 / static_cast<double>(m.pixels());
  const double tv = options.lambda_tv / static_cast<double>(m.pixels());
  for (int it = 0; it < options.iterations; ++it) {
    const LossGrad lg = model.input_grad(blend(x_adv, x_real, m), label);
    const double fy = true_class_probability(lg.logits, label);
    result.objective.push_back(fy + options.lambda_l1 * l1_norm(m) + options.lambda_tv * total_variation(m));

    // d p_y / d x = -p_y * d CE / d x.
    for (std::size_t p = 0; p < m.pixels(); ++p) {
      double g = 0.0;
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = p * ch + c;
        g += -fy * lg.grad.data[i] * (x_adv.data[i] - x_real.data[i]);
      }
      grad.data[p] = g + l1 * sign(m.data[p]);
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x + 1 < w) {
          const double s = sign(m.at(y, x + 1, 0) - m.at(y, x, 0));
          grad.at(y, x + 1, 0) += tv * s;
          grad.at(y, x, 0) -= tv * s;
        }
        if (y + 1 < h) {
          const double s = sign(m.at(y + 1, x, 0) - m.at(y, x, 0));
          grad.at(y + 1, x, 0) += tv * s;
          grad.at(y, x, 0) -= tv * s;
        }
      }
    }
    for (std::size_t p = 0; p < m.pixels(); ++p) m.data[p] = std::clamp(m.data[p] - options.lr * grad.data[p], 0.0, 1.0);
  }
  result.objective.push_back(interpret_objective(model, x_adv, x_real, label, m, options));
  return result;
}

double consistency(const std::vector<Image>& maps) {
  if (maps.size() < 2) fail(Errc::InvalidInput, "consistency: need at least two maps");
  for (const Image& m : maps) {
    require_valid(m, "consistency");
    require_same_shape(maps.front(), m, "consistency");
  }
  const double n = static_cast<double>(maps.size());
  const std::size_t count = maps.front().data.size();
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double mean = 0.0;
    for (const Image& m : maps) mean += m.data[i];
    mean /= n;
    double var = 0.0;
    for (const Image& m : maps) var += (m.data[i] - mean) * (m.data[i] - mean);
    total += std::sqrt(var / n);
  }
  const double mean_std = total / static_cast<double>(count);
  return std::clamp(1.0 - mean_std / 0.5, 0.0, 1.0);
}

double transferability_score(const Classifier& model, const Image& x_adv, int label) {
  if (model.num_classes() < 2) fail(Errc::InvalidInput, "transferability_score: model has a single class");
  require_input(model, x_adv, "transferability_score");
  require_label(model, label, "transferability_score");
  const std::vector<double> p = softmax(model.forward(x_adv));
  double best_other = 0.0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c)
    if (c != label) best_other = std::max(best_other, p[c]);
  return best_other - p[label];
}

}  // namespace blurforge
