// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/feature_set.hpp"

#include <vector>

namespace xmodal {

/// RBF kernel configuration: a base bandwidth (fixed or chosen per call from
/// the data) and a uniform mixture over multiples of it.
struct KernelSpec {
  enum class Bandwidth { Fixed, MedianHeuristic };

  Bandwidth mode = Bandwidth::MedianHeuristic;
  double sigma_squared = 1.0;  // only read when mode == Fixed
  std::vector<double> scales = {0.25, 0.5, 1.0, 2.0, 4.0};

  static KernelSpec fixed(double sigma_squared, std::vector<double> scales = {1.0});
  static KernelSpec median_heuristic(std::vector<double> scales = {0.25, 0.5, 1.0, 2.0, 4.0});

  void validate() const;
};

/// exp(-|x - y|^2 / (2 sigma_squared)).
double rbf_kernel(ConstRowRef x, ConstRowRef y, double sigma_squared);

/// Median of the pairwise squared distances between rows of `points`
/// (mean of the two middle values for an even pair count). Returns 1.0 when
/// that median is zero.
double median_heuristic_bandwidth(const Matrix& points);

/// A KernelSpec with its base bandwidth resolved against concrete data. The
/// bandwidths are constants from here on; nothing differentiates through them.
class MixtureKernel {
 public:
  MixtureKernel(const KernelSpec& spec, const Matrix& xs, const Matrix& ys);
  explicit MixtureKernel(std::vector<double> bandwidths);

  double operator()(ConstRowRef x, ConstRowRef y) const;

  /// Returns k(x, y) and sets `slope` so that dk/dx = slope * (y - x).
  double value_and_slope(ConstRowRef x, ConstRowRef y, double& slope) const;

  const std::vector<double>& bandwidths() const { return bandwidths_; }

 private:
  std::vector<double> bandwidths_;
};

/// Kernel matrix with entry (i, j) = k(xs_i, ys_j). Under the median heuristic
/// the base bandwidth is taken once from the union of xs and ys.
Matrix gram(const Matrix& xs, const Matrix& ys, const KernelSpec& spec);

}  // namespace xmodal
