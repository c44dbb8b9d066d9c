#pragma once

#include <stdexcept>
#include <string>

namespace blurforge {

enum class Errc {
  InvalidInput,
  ShapeMismatch,
  MissingFile,
  DimensionMismatch,
  NotGrayscale,
  IoError,
  ConfigError,
  EmptyInput,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace blurforge
