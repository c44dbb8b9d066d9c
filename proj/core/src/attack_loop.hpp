#pragma once

// Optimization loop shared by abba_attack and physical_attack.

#include <vector>

#include "blurforge/attack.hpp"

namespace blurforge::detail {

enum class ThetaMode { None, Shared, Separate, ObjectOnly, BackgroundOnly };

struct LoopPlan {
  KernelField kernel;
  std::vector<std::uint8_t> trainable;  // per kernel vector
  bool tie_vectors = false;             // trainable vectors move as one
  bool center_dominance = true;
  ThetaMode theta_mode = ThetaMode::Separate;
  Translation theta_o;
  Translation theta_b;
  SaliencyMask mask;
};

struct LoopResult {
  Image adversarial;
  AttackReport report;
  KernelField kernel;
};

LoopResult run_attack_loop(const Classifier& model, const Image& img, int label, LoopPlan plan,
                           const AttackConfig& cfg);

/// Euclidean projection onto the probability simplex.
void project_simplex(std::span<double> v);

KernelSummary summarize(const KernelField& kernel);

}  // namespace blurforge::detail
