#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blurforge/image.hpp"
#include "blurforge/model.hpp"

namespace blurforge {

struct CorpusEntry {
  std::string id;  // file stem
  std::filesystem::path image;
  int label = 0;
  std::optional<std::filesystem::path> mask;
};

/// Directory with a labels.csv manifest: header `filename,label[,mask]`.
struct Corpus {
  std::filesystem::path root;
  std::vector<CorpusEntry> entries;
};

/// Parses the manifest and checks that every referenced file exists
/// (MissingFile otherwise). Malformed rows raise ConfigError.
Corpus load_corpus(const std::filesystem::path& root);

void write_manifest(const Corpus& corpus);

/// Decodes every image of the corpus.
Dataset load_dataset(const Corpus& corpus);

struct ShapeSample {
  Image image;
  SaliencyMask mask;
  int label = 0;
};

/// Seeded synthetic-shapes data: class 0 square, 1 disk, 2 triangle,
/// 3 plus sign, with random placement, size, colors and pixel noise.
struct ShapesOptions {
  int size = 32;
  int count = 100;
  int num_classes = 4;
  double noise = 0.03;
  std::uint64_t seed = 0;
};

ShapeSample render_shape(int label, int size, double noise, std::uint64_t seed);
std::vector<ShapeSample> make_shapes(const ShapesOptions& options);

/// Writes <prefix><index>.png, <prefix><index>_mask.png and labels.csv.
Corpus write_shapes_corpus(const std::filesystem::path& root, const std::vector<ShapeSample>& samples,
                           const std::string& prefix = "img");

Dataset to_dataset(const std::vector<ShapeSample>& samples);

}  // namespace blurforge
