#include "blurforge/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "blurforge/error.hpp"
#include "blurforge/image_io.hpp"
#include "blurforge/rng.hpp"
#include "blurforge/saliency.hpp"

namespace blurforge {
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Corpus load_corpus(const fs::path& root) {
  const fs::path manifest = root / "labels.csv";
  std::ifstream in(manifest);
  if (!in) fail(Errc::MissingFile, "no labels.csv in " + root.string());

  Corpus corpus;
  corpus.root = root;
  std::string line;
  if (!std::getline(in, line)) return corpus;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  const std::vector<std::string> header = split_csv(line);
  if (header.size() < 2 || header[0] != "filename" || header[1] != "label" ||
      (header.size() == 3 && header[2] != "mask") || header.size() > 3) {
    fail(Errc::ConfigError, "labels.csv header must be filename,label[,mask]");
  }

  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() < 2 || f.size() > 3) fail(Errc::ConfigError, "labels.csv row " + std::to_string(row) + " is malformed");
    CorpusEntry e;
    e.image = root / f[0];
    e.id = fs::path(f[0]).stem().string();
    const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), e.label);
    if (ec != std::errc() || ptr != f[1].data() + f[1].size() || e.label < 0) {
      fail(Errc::ConfigError, "labels.csv row " + std::to_string(row) + " has an invalid label");
    }
    if (f.size() == 3 && !f[2].empty()) e.mask = root / f[2];
    if (!fs::exists(e.image)) fail(Errc::MissingFile, "corpus image not found: " + e.image.string());
    if (e.mask && !fs::exists(*e.mask)) fail(Errc::MissingFile, "corpus mask not found: " + e.mask->string());
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

void write_manifest(const Corpus& corpus) {
  std::ofstream out(corpus.root / "labels.csv", std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write labels.csv in " + corpus.root.string());
  const bool with_masks =
      std::any_of(corpus.entries.begin(), corpus.entries.end(), [](const CorpusEntry& e) { return e.mask.has_value(); });
  out << (with_masks ? "filename,label,mask\n" : "filename,label\n");
  for (const CorpusEntry& e : corpus.entries) {
    out << fs::relative(e.image, corpus.root).generic_string() << ',' << e.label;
    if (with_masks) out << ',' << (e.mask ? fs::relative(*e.mask, corpus.root).generic_string() : std::string());
    out << '\n';
  }
}

Dataset load_dataset(const Corpus& corpus) {
  Dataset data;
  data.reserve(corpus.entries.size());
  for (const CorpusEntry& e : corpus.entries) data.push_back({read_image(e.image), e.label});
  return data;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

namespace {

constexpr int kSuper = 4;

bool inside_shape(int label, double px, double py, double cx, double cy, double r) {
  const double dx = px - cx;
  const double dy = py - cy;
  switch (label % 4) {
    case 0: return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r;
    case 1: return dx * dx + dy * dy <= r * r;
    case 2: {
      // Upward triangle with apex at (cx, cy - r) and base at y = cy + 0.8 r.
      if (dy < -r || dy > 0.8 * r) return false;
      const double half = (dy + r) * 1.1 / 1.8;
      return std::abs(dx) <= half;
    }
    default: {
      const double arm = 0.32 * r;
      return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
  }
}

double luminance(const double* rgb) { return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]; }

}  // namespace

ShapeSample render_shape(int label, int size, double noise, std::uint64_t seed) {
  if (size < 8) fail(Errc::InvalidInput, "render_shape: size must be >= 8");
  Rng rng(seed);
  const double r = size * rng.uniform(0.22, 0.32);
  const double cx = size * 0.5 + size * rng.uniform(-0.12, 0.12);
  const double cy = size * 0.5 + size * rng.uniform(-0.12, 0.12);

  double fg[3];
  double bg[3];
  do {
    for (int c = 0; c < 3; ++c) {
      fg[c] = rng.uniform();
      bg[c] = rng.uniform();
    }
  } while (std::abs(luminance(fg) - luminance(bg)) < 0.3);

  ShapeSample s;
  s.label = label;
  s.image = Image(size, size, 3);
  s.mask = SaliencyMask(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx)
          hits += inside_shape(label, x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper, cx, cy, r);
      const double cover = static_cast<double>(hits) / (kSuper * kSuper);
      s.mask.at(y, x) = cover >= 0.5 ? 1 : 0;
      for (int c = 0; c < 3; ++c) {
        const double v = cover * fg[c] + (1.0 - cover) * bg[c] + noise * rng.normal();
        s.image.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return s;
}

std::vector<ShapeSample> make_shapes(const ShapesOptions& options) {
  if (options.num_classes < 2 || options.num_classes > 4) fail(Errc::InvalidInput, "make_shapes: 2 to 4 classes");
  if (options.count < 0) fail(Errc::InvalidInput, "make_shapes: negative count");
  std::vector<ShapeSample> samples;
  samples.reserve(options.count);
  for (int i = 0; i < options.count; ++i) {
    const std::uint64_t seed = Rng::derive_seed(options.seed, "shape." + std::to_string(i));
    samples.push_back(render_shape(i % options.num_classes, options.size, options.noise, seed));
  }
  return samples;
}

Corpus write_shapes_corpus(const fs::path& root, const std::vector<ShapeSample>& samples, const std::string& prefix) {
  fs::create_directories(root);
  Corpus corpus;
  corpus.root = root;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s%04zu", prefix.c_str(), i);
    CorpusEntry e;
    e.id = name;
    e.image = root / (std::string(name) + ".png");
    e.mask = root / (std::string(name) + "_mask.png");
    e.label = samples[i].label;
    write_png(e.image, samples[i].image);
    save_mask(*e.mask, samples[i].mask);
    corpus.entries.push_back(std::move(e));
  }
  write_manifest(corpus);
  return corpus;
}

Dataset to_dataset(const std::vector<ShapeSample>& samples) {
  Dataset data;
  data.reserve(samples.size());
  for (const ShapeSample& s : samples) data.push_back({s.image, s.label});
  return data;
}

}  // namespace blurforge
