#include "blurforge/attack.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "attack_loop.hpp"
#include "blurforge/error.hpp"
#include "blurforge/saliency.hpp"

namespace blurforge {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Pixel: return "pixel";
    case Variant::Obj: return "obj";
    case Variant::Bg: return "bg";
    case Variant::ImageWide: return "image";
    case Variant::Full: return "full";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : {Variant::Pixel, Variant::Obj, Variant::Bg, Variant::ImageWide, Variant::Full})
    if (name == to_string(v)) return v;
  return std::nullopt;
}

void AttackConfig::validate() const {
  if (iterations < 1) fail(Errc::ConfigError, "iterations must be >= 1");
  if (!(eps >= 1.0) || !std::isfinite(eps)) fail(Errc::ConfigError, "eps must be >= 1");
  if (!(eps_theta >= 0.0 && eps_theta <= 1.0)) fail(Errc::ConfigError, "eps_theta must lie in [0, 1]");
  if (n_steps < 1) fail(Errc::ConfigError, "n_steps must be >= 1");
  if (!(step_kernel >= 0.0) || !(step_theta_px >= 0.0)) fail(Errc::ConfigError, "step sizes must be non-negative");
  if (!(mu >= 0.0)) fail(Errc::ConfigError, "momentum must be non-negative");
  for (const auto& t : {fixed_theta_o, fixed_theta_b}) {
    if (t && !(std::max(std::abs(t->tx), std::abs(t->ty)) <= eps_theta)) {
      fail(Errc::ConfigError, "fixed translation exceeds eps_theta");
    }
  }
}

Translation direction_translation(double degrees, double eps_theta) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cx = std::cos(rad);
  const double cy = std::sin(rad);
  const double scale = eps_theta / std::max(std::abs(cx), std::abs(cy));
  return project_translation({cx * scale, cy * scale}, eps_theta);
}

namespace detail {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// g <- mu * g + grad / ||grad||_1
void accumulate_momentum(std::vector<double>& momentum, const std::vector<double>& grad, double mu) {
  double l1 = 0.0;
  for (double g : grad) l1 += std::abs(g);
  for (std::size_t i = 0; i < grad.size(); ++i) momentum[i] = mu * momentum[i] + (l1 > 0.0 ? grad[i] / l1 : 0.0);
}

class ThetaBlock {
 public:
  void step(Translation grad, Translation& theta, const AttackConfig& cfg, int height, int width) {
    accumulate_momentum(momentum_, {grad.tx, grad.ty}, cfg.mu);
    theta.tx += cfg.step_theta_px / width * sign(momentum_[0]);
    theta.ty += cfg.step_theta_px / height * sign(momentum_[1]);
    theta = project_translation(theta, cfg.eps_theta);
  }

 private:
  std::vector<double> momentum_ = {0.0, 0.0};
};

}  // namespace

void project_simplex(std::span<double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  for (double& x : v) x = std::max(x - tau, 0.0);
}

KernelSummary summarize(const KernelField& kernel) {
  KernelSummary s;
  s.mode = kernel.mode();
  const std::vector<double> w = kernel.weights();
  const int m = kernel.support();
  if (kernel.mode() == KernelMode::PerRegion) {
    s.object_weights.assign(w.begin(), w.begin() + m);
    s.background_weights.assign(w.begin() + m, w.begin() + 2 * m);
  }
  double total = 0.0;
  double lowest = 1.0;
  for (int y = 0; y < kernel.height(); ++y) {
    for (int x = 0; x < kernel.width(); ++x) {
      const double c = w[static_cast<std::size_t>(kernel.vector_index(y, x)) * m];
      total += c;
      lowest = std::min(lowest, c);
    }
  }
  s.mean_center_weight = total / (static_cast<double>(kernel.height()) * kernel.width());
  s.min_center_weight = lowest;
  return s;
}

LoopResult run_attack_loop(const Classifier& model, const Image& img, int label, LoopPlan plan,
                           const AttackConfig& cfg) {
  KernelField& kernel = plan.kernel;
  const int m = kernel.support();
  const int vectors = kernel.vector_count();

  std::vector<int> trainable;
  for (int v = 0; v < vectors; ++v)
    if (plan.trainable[v]) trainable.push_back(v);
  const std::size_t block = plan.tie_vectors ? static_cast<std::size_t>(m) : trainable.size() * m;
  std::vector<double> kernel_momentum(block, 0.0);
  std::vector<double> kernel_grad(block, 0.0);
  ThetaBlock theta_o_block;
  ThetaBlock theta_b_block;

  auto motion = [&] {
    MotionSpec spec;
    spec.theta_o = plan.theta_o;
    spec.theta_b = plan.theta_b;
    spec.n_steps = cfg.n_steps;
    spec.eps_theta = cfg.eps_theta;
    spec.padding = cfg.padding;
    return spec;
  };

  LoopResult result;
  AttackReport& report = result.report;
  report.label = label;
  report.clean_prediction = predict(model, img).label;

  bool fooled = false;
  for (int t = 0; t < cfg.iterations; ++t) {
    const MotionSpec spec = motion();
    const SubMotionStack stack = build_stack(img, plan.mask, spec, m);
    Image adv = synthesize(stack, kernel);
    LossGrad lg = model.input_grad(adv, label);
    report.loss_trace.push_back(lg.loss);
    if (cfg.early_stop && argmax(lg.logits) != label) {
      result.adversarial = std::move(adv);
      report.final_loss = lg.loss;
      report.final_prediction = argmax(lg.logits);
      fooled = true;
      break;
    }

    const SynthesisGrad sg = synthesize_grad(stack, kernel, spec, lg.grad);

    if (!trainable.empty()) {
      const std::vector<double>& src = cfg.kernel_step == KernelStep::Weights ? sg.dweights : sg.dlogits;
      std::fill(kernel_grad.begin(), kernel_grad.end(), 0.0);
      for (std::size_t k = 0; k < trainable.size(); ++k) {
        const std::size_t src_off = static_cast<std::size_t>(trainable[k]) * m;
        const std::size_t dst_off = plan.tie_vectors ? 0 : k * m;
        // Weight steps use the gradient's component tangent to the simplex.
        double mean = 0.0;
        if (cfg.kernel_step == KernelStep::Weights) {
          for (int i = 0; i < m; ++i) mean += src[src_off + i];
          mean /= m;
        }
        for (int i = 0; i < m; ++i) kernel_grad[dst_off + i] += src[src_off + i] - mean;
      }
      accumulate_momentum(kernel_momentum, kernel_grad, cfg.mu);

      std::vector<double> w(m);
      for (std::size_t k = 0; k < trainable.size(); ++k) {
        std::span<double> z = kernel.vector(trainable[k]);
        const double* dir = kernel_momentum.data() + (plan.tie_vectors ? 0 : k * m);
        if (cfg.kernel_step == KernelStep::Logits) {
          for (int i = 0; i < m; ++i) z[i] += cfg.step_kernel * sign(dir[i]);
        } else {
          softmax_weights(z, w);
          for (int i = 0; i < m; ++i) w[i] += cfg.step_kernel * sign(dir[i]);
          project_simplex(w);
          for (int i = 0; i < m; ++i) z[i] = w[i] > 0.0 ? std::log(w[i]) : -std::numeric_limits<double>::infinity();
        }
        if (plan.center_dominance) project_center(z);
      }
    }

    const int h = img.height;
    const int wd = img.width;
    switch (plan.theta_mode) {
      case ThetaMode::None: break;
      case ThetaMode::Shared:
        theta_o_block.step(sg.dtheta_o + sg.dtheta_b, plan.theta_o, cfg, h, wd);
        plan.theta_b = plan.theta_o;
        break;
      case ThetaMode::Separate:
        theta_o_block.step(sg.dtheta_o, plan.theta_o, cfg, h, wd);
        theta_b_block.step(sg.dtheta_b, plan.theta_b, cfg, h, wd);
        break;
      case ThetaMode::ObjectOnly: theta_o_block.step(sg.dtheta_o, plan.theta_o, cfg, h, wd); break;
      case ThetaMode::BackgroundOnly: theta_b_block.step(sg.dtheta_b, plan.theta_b, cfg, h, wd); break;
    }

    assert(!plan.center_dominance || kernel_feasible(kernel));
    assert(std::max(std::abs(plan.theta_o.tx), std::abs(plan.theta_o.ty)) <= cfg.eps_theta);
    assert(std::max(std::abs(plan.theta_b.tx), std::abs(plan.theta_b.ty)) <= cfg.eps_theta);
    if (cfg.observer) cfg.observer(IterationState{t, &kernel, plan.theta_o, plan.theta_b, lg.loss});
  }

  if (!fooled) {
    const SubMotionStack stack = build_stack(img, plan.mask, motion(), m);
    result.adversarial = synthesize(stack, kernel);
    const LossGrad lg = model.input_grad(result.adversarial, label);
    report.final_loss = lg.loss;
    report.final_prediction = argmax(lg.logits);
  }
  report.iterations_used = static_cast<int>(report.loss_trace.size());
  report.success = report.final_prediction != label;
  report.theta_o = plan.theta_o;
  report.theta_b = plan.theta_b;
  report.kernel = summarize(kernel);
  result.kernel = std::move(kernel);
  return result;
}

}  // namespace detail

AttackResult abba_attack(const Classifier& model, const Image& img, int label, const SaliencyMask& mask,
                         const AttackConfig& cfg) {
  cfg.validate();
  require_input(model, img, "abba_attack");
  require_same_shape(img, mask, "abba_attack");
  require_label(model, label, "abba_attack");

  using detail::ThetaMode;
  const int m = kernel_support(cfg.eps, cfg.n_steps);
  detail::LoopPlan plan;
  plan.center_dominance = true;

  // Exact delta for frozen regions: weights (1, 0, ..., 0).
  std::vector<double> frozen(m, -std::numeric_limits<double>::infinity());
  frozen[0] = 0.0;

  switch (cfg.variant) {
    case Variant::Pixel:
      plan.mask = mask;
      plan.kernel = KernelField::per_pixel(img.height, img.width, m);
      plan.kernel.fill_center(cfg.init_center_logit);
      plan.trainable.assign(plan.kernel.vector_count(), 1);
      plan.theta_mode = ThetaMode::Shared;
      break;
    case Variant::ImageWide:
      plan.mask = mask;
      plan.kernel = KernelField::per_region(mask, m);
      plan.kernel.fill_center(cfg.init_center_logit);
      plan.trainable = {1, 1};
      plan.tie_vectors = true;
      plan.theta_mode = ThetaMode::Shared;
      break;
    case Variant::Obj:
    case Variant::Bg:
    case Variant::Full: {
      plan.mask = ensure_nondegenerate(mask);
      plan.kernel = KernelField::per_region(plan.mask, m);
      plan.kernel.fill_center(cfg.init_center_logit);
      plan.trainable = {1, 1};
      plan.theta_mode = ThetaMode::Separate;
      if (cfg.variant == Variant::Obj) {
        std::copy(frozen.begin(), frozen.end(), plan.kernel.vector(kBackgroundRegion).begin());
        plan.trainable[kBackgroundRegion] = 0;
        plan.theta_mode = ThetaMode::ObjectOnly;
      } else if (cfg.variant == Variant::Bg) {
        std::copy(frozen.begin(), frozen.end(), plan.kernel.vector(kObjectRegion).begin());
        plan.trainable[kObjectRegion] = 0;
        plan.theta_mode = ThetaMode::BackgroundOnly;
      }
      break;
    }
  }

  const bool moves_o = plan.theta_mode == ThetaMode::Separate || plan.theta_mode == ThetaMode::ObjectOnly;
  const bool moves_b = plan.theta_mode == ThetaMode::Separate || plan.theta_mode == ThetaMode::BackgroundOnly;
  if (plan.theta_mode == ThetaMode::Shared) {
    const auto& fixed = cfg.fixed_theta_o ? cfg.fixed_theta_o : cfg.fixed_theta_b;
    if (fixed) {
      plan.theta_o = plan.theta_b = *fixed;
      plan.theta_mode = ThetaMode::None;
    }
  } else {
    const bool hold_o = moves_o && cfg.fixed_theta_o.has_value();
    const bool hold_b = moves_b && cfg.fixed_theta_b.has_value();
    if (hold_o) plan.theta_o = *cfg.fixed_theta_o;
    if (hold_b) plan.theta_b = *cfg.fixed_theta_b;
    const bool train_o = moves_o && !hold_o;
    const bool train_b = moves_b && !hold_b;
    plan.theta_mode = train_o && train_b ? ThetaMode::Separate
                      : train_o          ? ThetaMode::ObjectOnly
                      : train_b          ? ThetaMode::BackgroundOnly
                                         : ThetaMode::None;
  }

  detail::LoopResult loop = detail::run_attack_loop(model, img, label, std::move(plan), cfg);
  return {std::move(loop.adversarial), std::move(loop.report), std::move(loop.kernel)};
}

}  // namespace blurforge
