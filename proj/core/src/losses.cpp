// SPDX-License-Identifier: Apache-2.0
#include "xmodal/losses.hpp"

#include "xmodal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace xmodal {

namespace {

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(Errc::invalid_argument, std::string(name) + " must be nonnegative, got " + std::to_string(v));
  }
}

}  // namespace

void LossWeights::validate() const {
  require_nonnegative(lambda_id, "lambda_id");
  require_nonnegative(lambda_mmd, "lambda_mmd");
  require_nonnegative(lambda_hctri, "lambda_hctri");
}

void HcTriConfig::validate() const { require_nonnegative(rho1, "hc-tri margin rho1"); }

IdLoss loss_id(const Matrix& logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw Error(Errc::shape_mismatch, "logits have " + std::to_string(n) + " rows but " +
                                          std::to_string(labels.size()) + " labels were given");
  }
  if (n == 0) throw Error(Errc::invalid_argument, "identity loss needs a nonempty batch");

  IdLoss out;
  out.grad_logits.resize(n, c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= c) {
      throw Error(Errc::invalid_argument, "label " + std::to_string(label) + " out of range for " +
                                              std::to_string(c) + " classes");
    }
    const double peak = logits.row(i).maxCoeff();
    const RowVector e = (logits.row(i).array() - peak).exp().matrix();
    const double z = e.sum();
    total += std::log(z) + peak - logits(i, label);
    out.grad_logits.row(i) = e / z;
    out.grad_logits(i, label) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = total * inv_n;
  out.grad_logits *= inv_n;
  return out;
}

HeteroCenters hetero_centers(const FeatureSet& batch) {
  batch.validate();
  HeteroCenters hc;
  hc.identities = batch.present_identities();
  const auto p = static_cast<Eigen::Index>(hc.identities.size());
  hc.visible = Matrix::Zero(p, batch.dim());
  hc.thermal = Matrix::Zero(p, batch.dim());
  hc.visible_count.assign(hc.identities.size(), 0);
  hc.thermal_count.assign(hc.identities.size(), 0);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto slot = static_cast<Eigen::Index>(
        std::lower_bound(hc.identities.begin(), hc.identities.end(), batch.identities[i]) -
        hc.identities.begin());
    const auto row = batch.features.row(static_cast<Eigen::Index>(i));
    if (batch.modalities[i] == Modality::Visible) {
      hc.visible.row(slot) += row;
      ++hc.visible_count[static_cast<std::size_t>(slot)];
    } else {
      hc.thermal.row(slot) += row;
      ++hc.thermal_count[static_cast<std::size_t>(slot)];
    }
  }
  for (Eigen::Index s = 0; s < p; ++s) {
    const auto vs = hc.visible_count[static_cast<std::size_t>(s)];
    const auto ts = hc.thermal_count[static_cast<std::size_t>(s)];
    if (vs == 0 || ts == 0) {
      throw Error(Errc::missing_modality,
                  "identity " + std::to_string(hc.identities[static_cast<std::size_t>(s)]) +
                      " has no " + (vs == 0 ? "visible" : "thermal") + " samples");
    }
    hc.visible.row(s) /= static_cast<double>(vs);
    hc.thermal.row(s) /= static_cast<double>(ts);
  }
  return hc;
}

LossAndGrad loss_hc_tri(const FeatureSet& batch, const HcTriConfig& cfg, CostCounter* counter) {
  cfg.validate();
  const HeteroCenters hc = hetero_centers(batch);
  const auto p = static_cast<Eigen::Index>(hc.identities.size());
  if (p < 2) {
    throw Error(Errc::invalid_argument,
                "hc-tri loss needs at least 2 identities, got " + std::to_string(p));
  }

  // centers(m) selects the visible (0) or thermal (1) center table.
  const Matrix* centers[2] = {&hc.visible, &hc.thermal};
  Matrix center_grad[2] = {Matrix::Zero(p, batch.dim()), Matrix::Zero(p, batch.dim())};

  auto unit = [](const RowVector& diff, double norm) -> RowVector {
    return norm > 0.0 ? RowVector(diff / norm) : RowVector(RowVector::Zero(diff.size()));
  };

  double loss = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const RowVector pos_diff = hc.visible.row(i) - hc.thermal.row(i);
    const double pos = pos_diff.norm();
    if (counter) ++counter->center_distances;

    for (int anchor = 0; anchor < 2; ++anchor) {
      const int other = 1 - anchor;
      const auto a = centers[anchor]->row(i);
      double neg = std::numeric_limits<double>::infinity();
      Eigen::Index neg_id = -1;
      int neg_mod = 0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (j == i) continue;
        for (int n = 0; n < 2; ++n) {
          const double d = (a - centers[n]->row(j)).norm();
          if (counter) ++counter->center_distances;
          if (d < neg) {
            neg = d;
            neg_id = j;
            neg_mod = n;
          }
        }
      }

      const double hinge = cfg.rho1 + pos - neg;
      if (!(hinge > 0.0)) continue;
      loss += hinge;

      // d pos / d anchor points from the positive towards the anchor.
      const RowVector pos_dir = unit(anchor == 0 ? pos_diff : RowVector(-pos_diff), pos);
      center_grad[anchor].row(i) += pos_dir;
      center_grad[other].row(i) -= pos_dir;

      const RowVector neg_diff = a - centers[neg_mod]->row(neg_id);
      const RowVector neg_dir = unit(neg_diff, neg);
      center_grad[anchor].row(i) -= neg_dir;
      center_grad[neg_mod].row(neg_id) += neg_dir;
    }
  }

  LossAndGrad out;
  out.loss = loss;
  out.grads = Matrix::Zero(static_cast<Eigen::Index>(batch.size()), batch.dim());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto slot = static_cast<std::size_t>(
        std::lower_bound(hc.identities.begin(), hc.identities.end(), batch.identities[r]) -
        hc.identities.begin());
    const bool visible = batch.modalities[r] == Modality::Visible;
    const double count = visible ? hc.visible_count[slot] : hc.thermal_count[slot];
    out.grads.row(static_cast<Eigen::Index>(r)) =
        center_grad[visible ? 0 : 1].row(static_cast<Eigen::Index>(slot)) / count;
  }
  return out;
}

LossBundle loss_total(const FeatureSet& pooled, const Matrix& logits, std::span<const int> labels,
                      const LossConfig& cfg, CostCounter* counter) {
  cfg.weights.validate();
  pooled.validate();
  if (logits.rows() != static_cast<Eigen::Index>(pooled.size())) {
    throw Error(Errc::shape_mismatch, "logits have " + std::to_string(logits.rows()) +
                                          " rows but the batch has " +
                                          std::to_string(pooled.size()) + " samples");
  }
  const auto& w = cfg.weights;

  LossBundle b;
  b.grad_features = Matrix::Zero(pooled.features.rows(), pooled.features.cols());
  b.grad_logits = Matrix::Zero(logits.rows(), logits.cols());
  b.mean_class_mmd = std::numeric_limits<double>::quiet_NaN();

  if (w.lambda_id != 0.0) {
    IdLoss id = loss_id(logits, labels);
    b.id_term = id.loss;
    b.grad_logits += w.lambda_id * id.grad_logits;
  }

  if (w.lambda_mmd != 0.0) {
    const MmdOptions opts{cfg.estimator, counter};
    Matrix grads;
    switch (cfg.alignment) {
      case Alignment::Marginal: {
        auto r = loss_mmd_marginal(pooled, cfg.kernel, opts);
        b.mmd_term = r.loss;
        b.mean_class_mmd = r.loss;
        grads = std::move(r.grads);
        break;
      }
      case Alignment::Identity:
      case Alignment::MarginIdentity: {
        MarginConfig margin = cfg.margin;
        if (cfg.alignment == Alignment::Identity) margin = MarginConfig{0.0, false};
        auto r = loss_margin_mmd_id(pooled, cfg.kernel, margin, opts);
        b.mmd_term = r.loss;
        b.active_classes = r.active_classes;
        b.mean_class_mmd = std::accumulate(r.class_mmd.begin(), r.class_mmd.end(), 0.0) /
                           static_cast<double>(r.class_mmd.size());
        grads = std::move(r.grads);
        break;
      }
    }
    b.grad_features += w.lambda_mmd * grads;
  }

  if (w.lambda_hctri != 0.0) {
    auto r = loss_hc_tri(pooled, cfg.hctri, counter);
    b.hctri_term = r.loss;
    b.grad_features += w.lambda_hctri * r.grads;
  }

  b.total = w.lambda_id * b.id_term + w.lambda_mmd * b.mmd_term + w.lambda_hctri * b.hctri_term;
  return b;
}

}  // namespace xmodal
