// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/cost_counter.hpp"
#include "xmodal/feature_set.hpp"
#include "xmodal/kernels.hpp"
#include "xmodal/mmd.hpp"

#include <span>
#include <vector>

namespace xmodal {

struct LossWeights {
  double lambda_id = 1.0;
  double lambda_mmd = 0.25;
  double lambda_hctri = 2.0;

  void validate() const;
};

struct HcTriConfig {
  double rho1 = 0.3;

  void validate() const;
};

/// Which cross-modality alignment term occupies the MMD slot of the objective.
enum class Alignment {
  Marginal,        // MMD over all visible vs all thermal features
  Identity,        // class-conditional MMD averaged over identities
  MarginIdentity,  // class-conditional MMD with the rho gate
};

struct LossConfig {
  LossWeights weights;
  KernelSpec kernel;
  MarginConfig margin;
  HcTriConfig hctri;
  Alignment alignment = Alignment::MarginIdentity;
  Estimator estimator = Estimator::Biased;
};

struct IdLoss {
  double loss = 0.0;
  Matrix grad_logits;
};

/// Mean softmax cross-entropy; gradient (softmax - onehot) / N.
IdLoss loss_id(const Matrix& logits, std::span<const int> labels);

/// Per-identity visible and thermal means, identities ascending.
struct HeteroCenters {
  std::vector<int> identities;
  Matrix visible;
  Matrix thermal;
  std::vector<int> visible_count;
  std::vector<int> thermal_count;
};

HeteroCenters hetero_centers(const FeatureSet& batch);

/// Hetero-center triplet loss: for every identity and both anchor modalities,
/// [rho1 + |anchor - cross-modal positive| - hardest other-identity center]_+,
/// summed. The hardest negative is the first minimiser in (identity asc,
/// visible before thermal) order.
LossAndGrad loss_hc_tri(const FeatureSet& batch, const HcTriConfig& cfg,
                        CostCounter* counter = nullptr);

/// Weighted objective. Metric terms act on `pooled` (batch metadata plus
/// pooled features); the ID term acts on `logits`. Terms with zero weight
/// are not evaluated at all and leave their gradient contribution bitwise 0.
struct LossBundle {
  double total = 0.0;
  double id_term = 0.0;
  double mmd_term = 0.0;
  double hctri_term = 0.0;
  int active_classes = 0;
  double mean_class_mmd = 0.0;  // NaN when the alignment term is not evaluated
  Matrix grad_features;         // d total / d pooled
  Matrix grad_logits;           // d total / d logits
};

LossBundle loss_total(const FeatureSet& pooled, const Matrix& logits, std::span<const int> labels,
                      const LossConfig& cfg, CostCounter* counter = nullptr);

}  // namespace xmodal
