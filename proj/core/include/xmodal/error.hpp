// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xmodal {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  missing_modality,
  shape_mismatch,
  numeric,
  io,
  config,
  integrity,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::missing_modality: return "missing_modality";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::numeric: return "numeric";
    case Errc::io: return "io";
    case Errc::config: return "config";
    case Errc::integrity: return "integrity";
  }
  return "unknown";
}

/// Every failure raised by the library. `code()` is stable and is what the
/// CLI prints as its machine-parsable prefix.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace xmodal
