#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace blurforge {

enum class Padding { Zero, Replicate };

/// Dense H x W x C raster, row-major with interleaved channels. Values are
/// nominally in [0,1]; arithmetic is double precision throughout.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return height <= 0 || width <= 0 || channels <= 0; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary object/background partition; 1 marks the salient object.
struct SaliencyMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  SaliencyMask() = default;
  SaliencyMask(int h, int w, std::uint8_t fill = 0);

  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;

  friend bool operator==(const SaliencyMask&, const SaliencyMask&) = default;
};

/// Translation rates: tx is a fraction of the image width, ty of the height.
struct Translation {
  double tx = 0.0;
  double ty = 0.0;

  friend bool operator==(const Translation&, const Translation&) = default;
};

inline Translation operator+(Translation a, Translation b) { return {a.tx + b.tx, a.ty + b.ty}; }
inline Translation operator*(double s, Translation t) { return {s * t.tx, s * t.ty}; }

bool same_shape(const Image& a, const Image& b);
bool same_shape(const Image& img, const SaliencyMask& mask);

void require_valid(const Image& img, const char* what);
void require_same_shape(const Image& a, const Image& b, const char* what);
void require_same_shape(const Image& img, const SaliencyMask& mask, const char* what);

bool all_finite(const Image& img);
Image clamp01(Image img);
double max_abs_diff(const Image& a, const Image& b);

}  // namespace blurforge
