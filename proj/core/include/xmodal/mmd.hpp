// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/cost_counter.hpp"
#include "xmodal/feature_set.hpp"
#include "xmodal/kernels.hpp"

#include <vector>

namespace xmodal {

/// Squared MMD with its three kernel expectations.
/// value == same_x_term + same_y_term - 2 * cross_term.
struct MmdEstimate {
  double value = 0.0;
  double same_x_term = 0.0;
  double same_y_term = 0.0;
  double cross_term = 0.0;
};

enum class Estimator {
  Biased,    // V-statistic, self pairs included
  Unbiased,  // U-statistic, self pairs excluded from the same-set terms
};

struct MmdOptions {
  Estimator estimator = Estimator::Biased;
  CostCounter* counter = nullptr;
};

struct MarginConfig {
  double rho = 1.4;
  /// When set, surviving classes contribute MMD^2 - rho instead of MMD^2.
  bool soft_hinge = false;

  void validate() const;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grads;  // one row per batch row
};

struct MarginMmdResult {
  double loss = 0.0;
  Matrix grads;
  int active_classes = 0;
  std::vector<int> class_identities;  // ascending
  std::vector<double> class_mmd;      // raw per-class MMD^2, same order
};

MmdEstimate mmd2_biased(const Matrix& xs, const Matrix& ys, const KernelSpec& spec,
                        CostCounter* counter = nullptr);
MmdEstimate mmd2_unbiased(const Matrix& xs, const Matrix& ys, const KernelSpec& spec,
                          CostCounter* counter = nullptr);

/// Core estimator with an already resolved kernel. When `grad_x`/`grad_y` are
/// non-null they receive d(value)/d(row) for every row of xs/ys.
MmdEstimate mmd2_with_grad(const Matrix& xs, const Matrix& ys, const MixtureKernel& kernel,
                           Estimator estimator, Matrix* grad_x, Matrix* grad_y,
                           CostCounter* counter = nullptr);

/// MMD^2 between all visible and all thermal rows of the batch.
LossAndGrad loss_mmd_marginal(const FeatureSet& batch, const KernelSpec& spec,
                              const MmdOptions& opts = {});

/// Mean over identities of the per-identity visible/thermal MMD^2.
LossAndGrad loss_mmd_id(const FeatureSet& batch, const KernelSpec& spec,
                        const MmdOptions& opts = {});

/// Class-conditional MMD^2 where a class contributes only while its MMD^2
/// exceeds rho. Gated classes contribute exactly zero loss and gradient.
MarginMmdResult loss_margin_mmd_id(const FeatureSet& batch, const KernelSpec& spec,
                                   const MarginConfig& margin, const MmdOptions& opts = {});

}  // namespace xmodal
