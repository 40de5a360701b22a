// SPDX-License-Identifier: Apache-2.0
#include "xmodal/mmd.hpp"

#include "xmodal/error.hpp"

#include <cmath>
#include <string>

namespace xmodal {

namespace {

// Sum of k over unordered off-diagonal pairs of `pts`; optionally accumulates
// weight * d/dx_i of the full ordered double sum into `grad`.
double same_set_sum(const Matrix& pts, const MixtureKernel& kernel, double weight, Matrix* grad,
                    CostCounter* counter) {
  const Eigen::Index n = pts.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double slope = 0.0;
      sum += kernel.value_and_slope(pts.row(i), pts.row(j), slope);
      if (grad) {
        // Each unordered pair appears twice in the ordered sum.
        const RowVector step = (2.0 * weight * slope) * (pts.row(j) - pts.row(i));
        grad->row(i) += step;
        grad->row(j) -= step;
      }
    }
  }
  if (counter) counter->kernel_pairs += static_cast<std::uint64_t>(n * (n - 1) / 2);
  return sum;
}

void require_rows(const Matrix& m, Eigen::Index min_rows, const char* which) {
  if (m.rows() < min_rows) {
    throw Error(Errc::invalid_argument, std::string(which) + " needs at least " +
                                            std::to_string(min_rows) + " samples, got " +
                                            std::to_string(m.rows()));
  }
}

struct ModalityRows {
  std::vector<std::size_t> visible;
  std::vector<std::size_t> thermal;
};

struct ClassRows {
  int identity;
  ModalityRows rows;
};

std::vector<ClassRows> split_by_class(const FeatureSet& batch) {
  std::vector<ClassRows> classes;
  for (int id : batch.present_identities()) {
    ClassRows c{id, {batch.rows_where(id, Modality::Visible), batch.rows_where(id, Modality::Thermal)}};
    if (c.rows.visible.empty() || c.rows.thermal.empty()) {
      const auto missing = c.rows.visible.empty() ? Modality::Visible : Modality::Thermal;
      throw Error(Errc::missing_modality, "identity " + std::to_string(id) + " has no " +
                                              std::string(to_string(missing)) + " samples");
    }
    classes.push_back(std::move(c));
  }
  return classes;
}

// MMD^2 of one (visible, thermal) split of the batch, with gradients
// scattered into `grads` scaled by `weight` when requested.
MmdEstimate split_mmd(const FeatureSet& batch, const ModalityRows& rows, const KernelSpec& spec,
                      const MmdOptions& opts, Matrix* grads, double weight) {
  const Matrix xs = gather_rows(batch.features, rows.visible);
  const Matrix ys = gather_rows(batch.features, rows.thermal);
  const MixtureKernel kernel(spec, xs, ys);
  Matrix gx, gy;
  const MmdEstimate est = mmd2_with_grad(xs, ys, kernel, opts.estimator, grads ? &gx : nullptr,
                                         grads ? &gy : nullptr, opts.counter);
  if (grads) {
    for (std::size_t i = 0; i < rows.visible.size(); ++i) {
      grads->row(static_cast<Eigen::Index>(rows.visible[i])) += weight * gx.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i < rows.thermal.size(); ++i) {
      grads->row(static_cast<Eigen::Index>(rows.thermal[i])) += weight * gy.row(static_cast<Eigen::Index>(i));
    }
  }
  return est;
}

double reported(double loss, Estimator estimator) {
  return estimator == Estimator::Unbiased && loss < 0.0 ? 0.0 : loss;
}

MarginMmdResult class_conditional(const FeatureSet& batch, const KernelSpec& spec,
                                  const MarginConfig* margin, const MmdOptions& opts) {
  batch.validate();
  const auto classes = split_by_class(batch);
  if (classes.empty()) throw Error(Errc::invalid_argument, "class-conditional MMD needs a nonempty batch");

  MarginMmdResult out;
  out.grads = Matrix::Zero(static_cast<Eigen::Index>(batch.size()), batch.dim());
  const double inv_classes = 1.0 / static_cast<double>(classes.size());
  const bool gated = margin != nullptr && margin->rho > 0.0;

  double sum = 0.0;
  Matrix class_grads(out.grads.rows(), out.grads.cols());
  for (const auto& c : classes) {
    class_grads.setZero();
    const MmdEstimate est = split_mmd(batch, c.rows, spec, opts, &class_grads, inv_classes);
    out.class_identities.push_back(c.identity);
    out.class_mmd.push_back(est.value);
    if (gated && !(est.value - margin->rho > 0.0)) continue;
    ++out.active_classes;
    sum += (margin != nullptr && margin->soft_hinge) ? est.value - margin->rho : est.value;
    out.grads += class_grads;
  }
  out.loss = reported(sum * inv_classes, opts.estimator);
  return out;
}

}  // namespace

void MarginConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw Error(Errc::invalid_argument, "margin rho must be nonnegative, got " + std::to_string(rho));
  }
}

MmdEstimate mmd2_with_grad(const Matrix& xs, const Matrix& ys, const MixtureKernel& kernel,
                           Estimator estimator, Matrix* grad_x, Matrix* grad_y,
                           CostCounter* counter) {
  const Eigen::Index n = xs.rows();
  const Eigen::Index m = ys.rows();
  const Eigen::Index min_rows = estimator == Estimator::Unbiased ? 2 : 1;
  require_rows(xs, min_rows, "first sample set");
  require_rows(ys, min_rows, "second sample set");
  if (xs.cols() != ys.cols()) {
    throw Error(Errc::dimension_mismatch, "feature dimensions differ: " + std::to_string(xs.cols()) +
                                              " vs " + std::to_string(ys.cols()));
  }

  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  double wx, wy;  // normalisation of the same-set double sums
  double diag_x, diag_y;
  if (estimator == Estimator::Biased) {
    wx = 1.0 / (nd * nd);
    wy = 1.0 / (md * md);
    diag_x = nd;
    diag_y = md;
  } else {
    wx = 1.0 / (nd * (nd - 1.0));
    wy = 1.0 / (md * (md - 1.0));
    diag_x = 0.0;
    diag_y = 0.0;
  }
  const double wxy = 1.0 / (nd * md);

  if (grad_x) *grad_x = Matrix::Zero(n, xs.cols());
  if (grad_y) *grad_y = Matrix::Zero(m, ys.cols());

  MmdEstimate est;
  est.same_x_term = wx * (diag_x + 2.0 * same_set_sum(xs, kernel, wx, grad_x, counter));
  est.same_y_term = wy * (diag_y + 2.0 * same_set_sum(ys, kernel, wy, grad_y, counter));

  double cross = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double slope = 0.0;
      cross += kernel.value_and_slope(xs.row(i), ys.row(j), slope);
      if (grad_x || grad_y) {
        // value carries -2 * wxy * k(x_i, y_j).
        const RowVector step = (-2.0 * wxy * slope) * (ys.row(j) - xs.row(i));
        if (grad_x) grad_x->row(i) += step;
        if (grad_y) grad_y->row(j) -= step;
      }
    }
  }
  if (counter) counter->kernel_pairs += static_cast<std::uint64_t>(n * m);
  est.cross_term = wxy * cross;
  est.value = est.same_x_term + est.same_y_term - 2.0 * est.cross_term;
  return est;
}

MmdEstimate mmd2_biased(const Matrix& xs, const Matrix& ys, const KernelSpec& spec,
                        CostCounter* counter) {
  require_rows(xs, 1, "first sample set");
  require_rows(ys, 1, "second sample set");
  return mmd2_with_grad(xs, ys, MixtureKernel(spec, xs, ys), Estimator::Biased, nullptr, nullptr,
                        counter);
}

MmdEstimate mmd2_unbiased(const Matrix& xs, const Matrix& ys, const KernelSpec& spec,
                          CostCounter* counter) {
  require_rows(xs, 2, "first sample set");
  require_rows(ys, 2, "second sample set");
  return mmd2_with_grad(xs, ys, MixtureKernel(spec, xs, ys), Estimator::Unbiased, nullptr,
                        nullptr, counter);
}

LossAndGrad loss_mmd_marginal(const FeatureSet& batch, const KernelSpec& spec,
                              const MmdOptions& opts) {
  batch.validate();
  ModalityRows rows{batch.rows_where(Modality::Visible), batch.rows_where(Modality::Thermal)};
  for (auto m : {Modality::Visible, Modality::Thermal}) {
    if ((m == Modality::Visible ? rows.visible : rows.thermal).empty()) {
      throw Error(Errc::missing_modality,
                  "batch has no " + std::string(to_string(m)) + " samples");
    }
  }
  LossAndGrad out;
  out.grads = Matrix::Zero(static_cast<Eigen::Index>(batch.size()), batch.dim());
  out.loss = reported(split_mmd(batch, rows, spec, opts, &out.grads, 1.0).value, opts.estimator);
  return out;
}

LossAndGrad loss_mmd_id(const FeatureSet& batch, const KernelSpec& spec, const MmdOptions& opts) {
  auto r = class_conditional(batch, spec, nullptr, opts);
  return {r.loss, std::move(r.grads)};
}

MarginMmdResult loss_margin_mmd_id(const FeatureSet& batch, const KernelSpec& spec,
                                   const MarginConfig& margin, const MmdOptions& opts) {
  margin.validate();
  return class_conditional(batch, spec, &margin, opts);
}

}  // namespace xmodal
