#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "blurforge/error.hpp"

// Little-endian scalar helpers shared by the raw image, kernel field and
// checkpoint formats.
namespace blurforge::binary {

static_assert(std::endian::native == std::endian::little, "only little-endian hosts are supported");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) fail(Errc::IoError, "unexpected end of binary stream");
  return value;
}

inline void put_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_doubles(std::istream& is, double* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) fail(Errc::IoError, "unexpected end of binary stream");
}

}  // namespace blurforge::binary
