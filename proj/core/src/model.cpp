#include "blurforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "blurforge/binary_io.hpp"
#include "blurforge/error.hpp"
#include "blurforge/rng.hpp"

namespace blurforge {
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Loss helpers

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) fail(Errc::InvalidInput, "cross_entropy: label out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return std::log(s) + m - logits[label];
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= s;
  return p;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

void require_input(const Classifier& model, const Image& img, const char* what) {
  require_valid(img, what);
  const InputShape s = model.input_shape();
  if (img.height != s.height || img.width != s.width || img.channels != s.channels) {
    fail(Errc::ShapeMismatch, std::string(what) + ": image does not match the model input shape");
  }
}

void require_label(const Classifier& model, int label, const char* what) {
  if (label < 0 || label >= model.num_classes()) fail(Errc::InvalidInput, std::string(what) + ": label out of range");
}

LossGrad input_grad(const Classifier& model, const Image& img, int label, LossKind kind) {
  switch (kind) {
    case LossKind::CrossEntropy: return model.input_grad(img, label);
  }
  fail(Errc::InvalidInput, "input_grad: unsupported loss");
}

Prediction predict(const Classifier& model, const Image& img) {
  Prediction p;
  p.logits = model.forward(img);
  p.label = argmax(p.logits);
  return p;
}

// ---------------------------------------------------------------------------
// TinyCnn

struct TinyCnn::Layout {
  int c, h, w;        // input
  int h1, w1;         // after first pool
  int h2, w2;         // after second pool
  int features;
  int classes;
  std::size_t w1_off, b1_off, w2_off, b2_off, wd_off, bd_off, total;
};

struct TinyCnn::Activations {
  std::vector<double> x;      // input, CHW
  std::vector<double> a1;     // relu(conv1)
  std::vector<double> p1;     // pool1
  std::vector<int> idx1;      // argmax into a1 per pool1 cell
  std::vector<double> a2;
  std::vector<double> p2;
  std::vector<int> idx2;
  std::vector<double> logits;
};

namespace {

struct LayoutDims {
  int h1, w1, h2, w2;
};

LayoutDims pooled_dims(InputShape s) { return {s.height / 2, s.width / 2, s.height / 4, s.width / 4}; }

// "Same" 3x3 convolution, CHW layout.
void conv3x3_forward(const double* in, int cin, int h, int w, const double* weights, const double* bias, int cout,
                     double* out) {
  for (int o = 0; o < cout; ++o) {
    double* dst = out + static_cast<std::size_t>(o) * h * w;
    std::fill(dst, dst + static_cast<std::size_t>(h) * w, bias[o]);
    for (int i = 0; i < cin; ++i) {
      const double* src = in + static_cast<std::size_t>(i) * h * w;
      const double* k = weights + (static_cast<std::size_t>(o) * cin + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wt = k[ky * 3 + kx];
          const int dy = ky - 1;
          const int dx = kx - 1;
          const int y_lo = std::max(0, -dy), y_hi = std::min(h, h - dy);
          const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
            double* drow = dst + static_cast<std::size_t>(y) * w;
            for (int x = x_lo; x < x_hi; ++x) drow[x] += wt * srow[x];
          }
        }
      }
    }
  }
}

void conv3x3_backward(const double* in, int cin, int h, int w, const double* weights, int cout, const double* dout,
                      double* dweights, double* dbias, double* din) {
  for (int o = 0; o < cout; ++o) {
    const double* g = dout + static_cast<std::size_t>(o) * h * w;
    if (dbias) {
      double s = 0.0;
      for (int p = 0; p < h * w; ++p) s += g[p];
      dbias[o] += s;
    }
    for (int i = 0; i < cin; ++i) {
      const double* src = in + static_cast<std::size_t>(i) * h * w;
      double* dsrc = din ? din + static_cast<std::size_t>(i) * h * w : nullptr;
      const std::size_t koff = (static_cast<std::size_t>(o) * cin + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int dy = ky - 1;
          const int dx = kx - 1;
          const int y_lo = std::max(0, -dy), y_hi = std::min(h, h - dy);
          const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
          const double wt = weights[koff + ky * 3 + kx];
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * w;
            const std::size_t srow = static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x_lo; x < x_hi; ++x) {
              acc += grow[x] * src[srow + x];
              if (dsrc) dsrc[srow + x] += wt * grow[x];
            }
          }
          if (dweights) dweights[koff + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

void maxpool2_forward(const std::vector<double>& in, int ch, int h, int w, std::vector<double>& out,
                      std::vector<int>& idx) {
  const int ho = h / 2, wo = w / 2;
  out.assign(static_cast<std::size_t>(ch) * ho * wo, 0.0);
  idx.assign(out.size(), 0);
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        int best = (c * h + 2 * y) * w + 2 * x;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int k = (c * h + 2 * y + dy) * w + 2 * x + dx;
            if (in[k] > in[best]) best = k;
          }
        const std::size_t o = (static_cast<std::size_t>(c) * ho + y) * wo + x;
        out[o] = in[best];
        idx[o] = best;
      }
    }
  }
}

}  // namespace

std::size_t TinyCnn::parameter_count(InputShape s, int classes) {
  const LayoutDims d = pooled_dims(s);
  const std::size_t features = static_cast<std::size_t>(kConv2Filters) * d.h2 * d.w2;
  return static_cast<std::size_t>(kConv1Filters) * s.channels * 9 + kConv1Filters +
         static_cast<std::size_t>(kConv2Filters) * kConv1Filters * 9 + kConv2Filters + features * classes + classes;
}

TinyCnn::TinyCnn(InputShape shape, int num_classes) : shape_(shape), num_classes_(num_classes) {
  if (shape.height < 4 || shape.width < 4 || shape.channels < 1) {
    fail(Errc::InvalidInput, "TinyCnn: input must be at least 4x4 with one channel");
  }
  if (num_classes < 2) fail(Errc::InvalidInput, "TinyCnn: need at least two classes");
  params_.assign(parameter_count(shape, num_classes), 0.0);
}

TinyCnn TinyCnn::initialized(InputShape shape, int num_classes, std::uint64_t seed) {
  TinyCnn model(shape, num_classes);
  Rng rng(Rng::derive_seed(seed, "tinycnn.init"));
  for (double& p : model.params_) p = rng.uniform(-0.05, 0.05);
  return model;
}

TinyCnn::Layout TinyCnn::layout() const {
  Layout L{};
  L.c = shape_.channels;
  L.h = shape_.height;
  L.w = shape_.width;
  const LayoutDims d = pooled_dims(shape_);
  L.h1 = d.h1;
  L.w1 = d.w1;
  L.h2 = d.h2;
  L.w2 = d.w2;
  L.features = kConv2Filters * L.h2 * L.w2;
  L.classes = num_classes_;
  L.w1_off = 0;
  L.b1_off = L.w1_off + static_cast<std::size_t>(kConv1Filters) * L.c * 9;
  L.w2_off = L.b1_off + kConv1Filters;
  L.b2_off = L.w2_off + static_cast<std::size_t>(kConv2Filters) * kConv1Filters * 9;
  L.wd_off = L.b2_off + kConv2Filters;
  L.bd_off = L.wd_off + static_cast<std::size_t>(L.features) * L.classes;
  L.total = L.bd_off + L.classes;
  return L;
}

TinyCnn::Activations TinyCnn::run_forward(const Image& img) const {
  require_input(*this, img, "TinyCnn::forward");
  const Layout L = layout();
  const double* P = params_.data();
  Activations act;

  act.x.resize(static_cast<std::size_t>(L.c) * L.h * L.w);
  for (int y = 0; y < L.h; ++y)
    for (int x = 0; x < L.w; ++x)
      for (int c = 0; c < L.c; ++c) act.x[(static_cast<std::size_t>(c) * L.h + y) * L.w + x] = img.at(y, x, c);

  act.a1.resize(static_cast<std::size_t>(kConv1Filters) * L.h * L.w);
  conv3x3_forward(act.x.data(), L.c, L.h, L.w, P + L.w1_off, P + L.b1_off, kConv1Filters, act.a1.data());
  for (double& v : act.a1) v = v > 0.0 ? v : 0.0;
  maxpool2_forward(act.a1, kConv1Filters, L.h, L.w, act.p1, act.idx1);

  act.a2.resize(static_cast<std::size_t>(kConv2Filters) * L.h1 * L.w1);
  conv3x3_forward(act.p1.data(), kConv1Filters, L.h1, L.w1, P + L.w2_off, P + L.b2_off, kConv2Filters, act.a2.data());
  for (double& v : act.a2) v = v > 0.0 ? v : 0.0;
  maxpool2_forward(act.a2, kConv2Filters, L.h1, L.w1, act.p2, act.idx2);

  act.logits.assign(L.classes, 0.0);
  for (int k = 0; k < L.classes; ++k) {
    const double* row = P + L.wd_off + static_cast<std::size_t>(k) * L.features;
    double z = P[L.bd_off + k];
    for (int f = 0; f < L.features; ++f) z += row[f] * act.p2[f];
    act.logits[k] = z;
  }
  return act;
}

void TinyCnn::backward(const Activations& act, std::span<const double> dlogits, std::vector<double>* dparams,
                       Image* dinput) const {
  const Layout L = layout();
  const double* P = params_.data();
  double* G = dparams ? dparams->data() : nullptr;

  std::vector<double> dp2(L.features, 0.0);
  for (int k = 0; k < L.classes; ++k) {
    const double g = dlogits[k];
    const double* row = P + L.wd_off + static_cast<std::size_t>(k) * L.features;
    if (G) {
      double* grow = G + L.wd_off + static_cast<std::size_t>(k) * L.features;
      for (int f = 0; f < L.features; ++f) grow[f] += g * act.p2[f];
      G[L.bd_off + k] += g;
    }
    for (int f = 0; f < L.features; ++f) dp2[f] += g * row[f];
  }

  std::vector<double> da2(act.a2.size(), 0.0);
  for (std::size_t o = 0; o < dp2.size(); ++o) da2[act.idx2[o]] += dp2[o];
  for (std::size_t i = 0; i < da2.size(); ++i)
    if (!(act.a2[i] > 0.0)) da2[i] = 0.0;

  std::vector<double> dp1(act.p1.size(), 0.0);
  conv3x3_backward(act.p1.data(), kConv1Filters, L.h1, L.w1, P + L.w2_off, kConv2Filters, da2.data(),
                   G ? G + L.w2_off : nullptr, G ? G + L.b2_off : nullptr, dp1.data());

  std::vector<double> da1(act.a1.size(), 0.0);
  for (std::size_t o = 0; o < dp1.size(); ++o) da1[act.idx1[o]] += dp1[o];
  for (std::size_t i = 0; i < da1.size(); ++i)
    if (!(act.a1[i] > 0.0)) da1[i] = 0.0;

  std::vector<double> dx;
  if (dinput) dx.assign(act.x.size(), 0.0);
  conv3x3_backward(act.x.data(), L.c, L.h, L.w, P + L.w1_off, kConv1Filters, da1.data(), G ? G + L.w1_off : nullptr,
                   G ? G + L.b1_off : nullptr, dinput ? dx.data() : nullptr);

  if (dinput) {
    *dinput = Image(L.h, L.w, L.c);
    for (int y = 0; y < L.h; ++y)
      for (int x = 0; x < L.w; ++x)
        for (int c = 0; c < L.c; ++c) dinput->at(y, x, c) = dx[(static_cast<std::size_t>(c) * L.h + y) * L.w + x];
  }
}

std::vector<double> TinyCnn::forward(const Image& img) const { return run_forward(img).logits; }

namespace {

std::vector<double> cross_entropy_dlogits(const std::vector<double>& logits, int label) {
  std::vector<double> g = softmax(logits);
  g[label] -= 1.0;
  return g;
}

}  // namespace

LossGrad TinyCnn::input_grad(const Image& img, int label) const {
  require_label(*this, label, "TinyCnn::input_grad");
  const Activations act = run_forward(img);
  LossGrad out;
  out.loss = cross_entropy(act.logits, label);
  backward(act, cross_entropy_dlogits(act.logits, label), nullptr, &out.grad);
  out.logits = act.logits;
  return out;
}

TinyCnn::ParameterGrad TinyCnn::parameter_grad(const Image& img, int label) const {
  require_label(*this, label, "TinyCnn::parameter_grad");
  const Activations act = run_forward(img);
  ParameterGrad out;
  out.loss = cross_entropy(act.logits, label);
  out.grad.assign(params_.size(), 0.0);
  backward(act, cross_entropy_dlogits(act.logits, label), &out.grad, nullptr);
  out.logits = act.logits;
  return out;
}

void TinyCnn::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write("TCNN", 4);
  binary::put<std::uint32_t>(out, 1);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(shape_.height));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(shape_.width));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(shape_.channels));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(num_classes_));
  binary::put<std::uint64_t>(out, params_.size());
  binary::put_doubles(out, params_.data(), params_.size());
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

TinyCnn TinyCnn::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(fs::exists(path) ? Errc::IoError : Errc::MissingFile, "cannot open model " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TCNN", 4) != 0) fail(Errc::IoError, "not a TinyCnn checkpoint: " + path.string());
  const auto version = binary::get<std::uint32_t>(in);
  if (version != 1) fail(Errc::IoError, "unsupported checkpoint version " + std::to_string(version));
  InputShape shape;
  shape.height = static_cast<int>(binary::get<std::uint32_t>(in));
  shape.width = static_cast<int>(binary::get<std::uint32_t>(in));
  shape.channels = static_cast<int>(binary::get<std::uint32_t>(in));
  const int classes = static_cast<int>(binary::get<std::uint32_t>(in));
  const auto count = binary::get<std::uint64_t>(in);
  TinyCnn model(shape, classes);
  if (count != model.params_.size()) fail(Errc::IoError, "checkpoint parameter count does not match its shape");
  binary::get_doubles(in, model.params_.data(), model.params_.size());
  return model;
}

// ---------------------------------------------------------------------------
// Training

double accuracy(const Classifier& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Sample& s : data) correct += predict(model, s.image).label == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<EpochStats> train(TinyCnn& model, const Dataset& train_set, const Dataset& test_set,
                              const TrainOptions& options) {
  if (train_set.empty()) fail(Errc::EmptyInput, "train: empty dataset");
  if (options.epochs < 0) fail(Errc::InvalidInput, "train: negative epoch count");
  for (const Sample& s : train_set) {
    require_input(model, s.image, "train");
    require_label(model, s.label, "train");
  }

  Rng rng(Rng::derive_seed(options.seed, "train.shuffle"));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> trace;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Sample& s = train_set[idx];
      const TinyCnn::ParameterGrad g = model.parameter_grad(s.image, s.label);
      loss_sum += g.loss;
      if (options.lr != 0.0) {
        std::span<double> p = model.parameters();
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= options.lr * g.grad[k];
      }
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.mean_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = accuracy(model, train_set);
    stats.test_accuracy = accuracy(model, test_set);
    trace.push_back(stats);
  }
  return trace;
}

}  // namespace blurforge
