#pragma once

#include <filesystem>

#include "blurforge/image.hpp"

namespace blurforge {

/// Reads an 8-bit PNG as 1-channel (gray) or 3-channel (RGB) image with
/// v = byte / 255. Alpha is dropped; palette and 16-bit inputs are converted.
Image read_png(const std::filesystem::path& path);

/// Writes 8-bit gray (1 channel) or RGB (3 channels), byte = round(v * 255)
/// clamped to [0, 255].
void write_png(const std::filesystem::path& path, const Image& img);

/// Lossless little-endian dump: H:u32, W:u32, C:u32 then H*W*C float64.
Image read_rawf(const std::filesystem::path& path);
void write_rawf(const std::filesystem::path& path, const Image& img);

/// Reads either format, chosen by extension (.rawf, otherwise PNG).
Image read_image(const std::filesystem::path& path);

std::uint8_t quantize(double v);

}  // namespace blurforge
