#include "blurforge/image_io.hpp"

#include <png.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "blurforge/binary_io.hpp"
#include "blurforge/error.hpp"

namespace blurforge {
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kMaxRawDim = 1u << 16;

}  // namespace

std::uint8_t quantize(double v) {
  const double q = std::round(v * 255.0);
  if (!(q > 0.0)) return 0;
  if (q >= 255.0) return 255;
  return static_cast<std::uint8_t>(q);
}

Image read_png(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingFile, "no such file: " + path.string());

  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(Errc::IoError, "cannot decode png " + path.string() + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;

  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    fail(Errc::IoError, "cannot decode png " + path.string() + ": " + png.message);
  }

  Image img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = buffer[i] / 255.0;
  return img;
}

void write_png(const fs::path& path, const Image& img) {
  require_valid(img, "write_png");
  if (img.channels != 1 && img.channels != 3) fail(Errc::InvalidInput, "write_png: channels must be 1 or 3");

  std::vector<png_byte> buffer(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) buffer[i] = quantize(img.data[i]);

  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    fail(Errc::IoError, "cannot write png " + path.string() + ": " + png.message);
  }
}

Image read_rawf(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(fs::exists(path) ? Errc::IoError : Errc::MissingFile, "cannot open " + path.string());
  const auto h = binary::get<std::uint32_t>(in);
  const auto w = binary::get<std::uint32_t>(in);
  const auto c = binary::get<std::uint32_t>(in);
  if (h == 0 || w == 0 || c == 0 || h > kMaxRawDim || w > kMaxRawDim || c > 4) {
    fail(Errc::IoError, "corrupt raw image header in " + path.string());
  }
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  binary::get_doubles(in, img.data.data(), img.data.size());
  return img;
}

void write_rawf(const fs::path& path, const Image& img) {
  require_valid(img, "write_rawf");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open " + path.string() + " for writing");
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(img.height));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(img.width));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(img.channels));
  binary::put_doubles(out, img.data.data(), img.data.size());
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

Image read_image(const fs::path& path) {
  if (path.extension() == ".rawf") return read_rawf(path);
  return read_png(path);
}

}  // namespace blurforge
