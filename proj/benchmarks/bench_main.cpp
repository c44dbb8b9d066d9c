#include <benchmark/benchmark.h>

#include "blurforge/attack.hpp"
#include "blurforge/blursynth.hpp"
#include "blurforge/corpus.hpp"
#include "blurforge/model.hpp"
#include "blurforge/warp.hpp"

using namespace blurforge;

namespace {

ShapeSample sample(int size) { return render_shape(1, size, 0.03, 5); }

void BM_Translate(benchmark::State& state) {
  const ShapeSample s = sample(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(translate(s.image, {0.13, -0.07}, Padding::Zero));
}
BENCHMARK(BM_Translate)->Arg(32)->Arg(128);

void BM_Synthesize(benchmark::State& state) {
  const ShapeSample s = sample(32);
  MotionSpec spec;
  spec.theta_o = {0.3, 0.1};
  spec.theta_b = {-0.2, 0.25};
  const int m = static_cast<int>(state.range(0));
  const SubMotionStack stack = build_stack(s.image, s.mask, spec, m);
  KernelField k = KernelField::per_pixel(32, 32, m);
  k.fill_center(10.0);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(stack, k));
}
BENCHMARK(BM_Synthesize)->Arg(1)->Arg(15)->Arg(51);

void BM_SynthesizeGrad(benchmark::State& state) {
  const ShapeSample s = sample(32);
  MotionSpec spec;
  spec.theta_o = {0.3, 0.1};
  spec.theta_b = {-0.2, 0.25};
  const int m = static_cast<int>(state.range(0));
  const SubMotionStack stack = build_stack(s.image, s.mask, spec, m);
  KernelField k = KernelField::per_pixel(32, 32, m);
  k.fill_center(10.0);
  const Image up(32, 32, 3, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_grad(stack, k, spec, up));
}
BENCHMARK(BM_SynthesizeGrad)->Arg(15)->Arg(51);

void BM_TinyCnnForward(benchmark::State& state) {
  const TinyCnn net = TinyCnn::initialized({32, 32, 3}, 4, 1);
  const ShapeSample s = sample(32);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(s.image));
}
BENCHMARK(BM_TinyCnnForward);

void BM_TinyCnnInputGrad(benchmark::State& state) {
  const TinyCnn net = TinyCnn::initialized({32, 32, 3}, 4, 1);
  const ShapeSample s = sample(32);
  for (auto _ : state) benchmark::DoNotOptimize(net.input_grad(s.image, s.label));
}
BENCHMARK(BM_TinyCnnInputGrad);

void BM_AttackIteration(benchmark::State& state) {
  const TinyCnn net = TinyCnn::initialized({32, 32, 3}, 4, 1);
  const ShapeSample s = sample(32);
  AttackConfig cfg;
  cfg.variant = static_cast<Variant>(state.range(0));
  cfg.iterations = 1;
  cfg.early_stop = false;
  for (auto _ : state) benchmark::DoNotOptimize(abba_attack(net, s.image, s.label, s.mask, cfg));
}
BENCHMARK(BM_AttackIteration)->DenseRange(0, 4);

}  // namespace

BENCHMARK_MAIN();
