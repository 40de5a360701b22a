// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace xmodal {

/// Counts the pairwise terms a loss actually evaluates.
///
/// `kernel_pairs` counts one per distinct sample pair passed through the
/// (mixture) kernel; self pairs are never evaluated since k(x, x) = 1.
/// `center_distances` counts Euclidean distances between hetero centers.
struct CostCounter {
  std::uint64_t kernel_pairs = 0;
  std::uint64_t center_distances = 0;
};

}  // namespace xmodal
