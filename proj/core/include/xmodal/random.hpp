// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xmodal {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named stream ("data", "sampler",
/// "gallery", "init", ...) from one root seed, so components can be varied
/// without perturbing each other.
std::uint64_t stream_seed(std::uint64_t root, std::string_view stream);

inline Rng make_stream(std::uint64_t root, std::string_view stream) {
  return Rng(stream_seed(root, stream));
}

}  // namespace xmodal
