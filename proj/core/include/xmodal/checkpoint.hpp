// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/encoder.hpp"

#include <filesystem>
#include <iosfwd>

namespace xmodal {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary parameter container; layout in docs/checkpoint-format.md.
void write_checkpoint(std::ostream& os, const EncoderParams& params);
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);

/// Loads into `params`, whose architecture must match the stored shape
/// table exactly (names, order and dimensions).
void read_checkpoint(std::istream& is, EncoderParams& params);
void load_checkpoint(const std::filesystem::path& path, EncoderParams& params);

}  // namespace xmodal
