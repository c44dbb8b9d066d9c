#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "blurforge/image.hpp"

namespace blurforge {

struct InputShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

enum class LossKind { CrossEntropy };

struct LossGrad {
  double loss = 0.0;
  Image grad;                   // d loss / d input, same shape as the input
  std::vector<double> logits;   // forward logits at the input
};

/// Differentiable image classifier. Implementations must be immutable after
/// construction so they can be shared across threads.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual int num_classes() const = 0;
  virtual InputShape input_shape() const = 0;
  virtual std::vector<double> forward(const Image& img) const = 0;
  /// Cross-entropy loss at `label` and its gradient w.r.t. the input.
  virtual LossGrad input_grad(const Image& img, int label) const = 0;
};

/// -log softmax(logits)[label], stabilized with log-sum-exp.
double cross_entropy(std::span<const double> logits, int label);
std::vector<double> softmax(std::span<const double> logits);
/// Index of the largest entry; ties go to the smaller index.
int argmax(std::span<const double> values);

LossGrad input_grad(const Classifier& model, const Image& img, int label, LossKind kind = LossKind::CrossEntropy);

struct Prediction {
  int label = 0;
  std::vector<double> logits;
};

Prediction predict(const Classifier& model, const Image& img);

void require_input(const Classifier& model, const Image& img, const char* what);
void require_label(const Classifier& model, int label, const char* what);

/// conv3x3(8) -> relu -> maxpool2 -> conv3x3(16) -> relu -> maxpool2 -> dense.
/// Convolutions use zero "same" padding; pooling floors odd sizes.
class TinyCnn final : public Classifier {
 public:
  TinyCnn(InputShape shape, int num_classes);

  /// Parameters drawn from uniform(-0.05, 0.05) with the given seed.
  static TinyCnn initialized(InputShape shape, int num_classes, std::uint64_t seed);

  int num_classes() const override { return num_classes_; }
  InputShape input_shape() const override { return shape_; }
  std::vector<double> forward(const Image& img) const override;
  LossGrad input_grad(const Image& img, int label) const override;

  struct ParameterGrad {
    double loss = 0.0;
    std::vector<double> grad;
    std::vector<double> logits;
  };
  ParameterGrad parameter_grad(const Image& img, int label) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  static std::size_t parameter_count(InputShape shape, int num_classes);

  /// Little-endian checkpoint: "TCNN", version u32, H/W/C/classes u32,
  /// parameter count u64, then float64 parameters.
  void save(const std::filesystem::path& path) const;
  static TinyCnn load(const std::filesystem::path& path);

  static constexpr int kConv1Filters = 8;
  static constexpr int kConv2Filters = 16;

 private:
  struct Layout;
  struct Activations;

  Layout layout() const;
  Activations run_forward(const Image& img) const;
  void backward(const Activations& act, std::span<const double> dlogits, std::vector<double>* dparams,
                Image* dinput) const;

  InputShape shape_;
  int num_classes_;
  std::vector<double> params_;
};

struct Sample {
  Image image;
  int label = 0;
};
using Dataset = std::vector<Sample>;

struct TrainOptions {
  int epochs = 5;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Per-sample SGD over a seeded shuffle of the training set.
std::vector<EpochStats> train(TinyCnn& model, const Dataset& train_set, const Dataset& test_set,
                              const TrainOptions& options);

double accuracy(const Classifier& model, const Dataset& data);

}  // namespace blurforge
