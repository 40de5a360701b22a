// SPDX-License-Identifier: Apache-2.0
#include "xmodal/kernels.hpp"

#include "xmodal/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xmodal {

namespace {

void check_same_dim(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error(Errc::dimension_mismatch, "feature dimensions differ: " + std::to_string(a) +
                                              " vs " + std::to_string(b));
  }
}

void check_bandwidth(double sigma_squared) {
  if (!(sigma_squared > 0.0) || !std::isfinite(sigma_squared)) {
    throw Error(Errc::invalid_argument,
                "kernel bandwidth must be positive, got " + std::to_string(sigma_squared));
  }
}

}  // namespace

KernelSpec KernelSpec::fixed(double sigma_squared, std::vector<double> scales) {
  KernelSpec spec;
  spec.mode = Bandwidth::Fixed;
  spec.sigma_squared = sigma_squared;
  spec.scales = std::move(scales);
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::median_heuristic(std::vector<double> scales) {
  KernelSpec spec;
  spec.mode = Bandwidth::MedianHeuristic;
  spec.scales = std::move(scales);
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (mode == Bandwidth::Fixed) check_bandwidth(sigma_squared);
  if (scales.empty()) throw Error(Errc::invalid_argument, "kernel mixture needs at least one scale");
  for (double s : scales) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(Errc::invalid_argument, "kernel mixture scale must be positive, got " +
                                              std::to_string(s));
    }
  }
}

double rbf_kernel(ConstRowRef x, ConstRowRef y, double sigma_squared) {
  check_same_dim(x.size(), y.size());
  check_bandwidth(sigma_squared);
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma_squared));
}

double median_heuristic_bandwidth(const Matrix& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) {
    throw Error(Errc::invalid_argument, "median heuristic needs at least 2 points, got " +
                                            std::to_string(n));
  }
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d2.push_back((points.row(i) - points.row(j)).squaredNorm());
    }
  }
  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
  double median = d2[mid];
  if (d2.size() % 2 == 0) {
    const double lower = *std::max_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  return median > 0.0 ? median : 1.0;
}

MixtureKernel::MixtureKernel(const KernelSpec& spec, const Matrix& xs, const Matrix& ys) {
  spec.validate();
  if (xs.rows() == 0 || ys.rows() == 0) {
    throw Error(Errc::invalid_argument, "kernel inputs must be nonempty");
  }
  check_same_dim(xs.cols(), ys.cols());
  double base = spec.sigma_squared;
  if (spec.mode == KernelSpec::Bandwidth::MedianHeuristic) {
    Matrix all(xs.rows() + ys.rows(), xs.cols());
    all.topRows(xs.rows()) = xs;
    all.bottomRows(ys.rows()) = ys;
    base = median_heuristic_bandwidth(all);
  }
  bandwidths_.reserve(spec.scales.size());
  for (double s : spec.scales) bandwidths_.push_back(s * base);
}

MixtureKernel::MixtureKernel(std::vector<double> bandwidths) : bandwidths_(std::move(bandwidths)) {
  if (bandwidths_.empty()) throw Error(Errc::invalid_argument, "kernel mixture needs at least one scale");
  for (double b : bandwidths_) check_bandwidth(b);
}

double MixtureKernel::operator()(ConstRowRef x, ConstRowRef y) const {
  const double d2 = (x - y).squaredNorm();
  double sum = 0.0;
  for (double b : bandwidths_) sum += std::exp(-d2 / (2.0 * b));
  return sum / static_cast<double>(bandwidths_.size());
}

double MixtureKernel::value_and_slope(ConstRowRef x, ConstRowRef y, double& slope) const {
  const double d2 = (x - y).squaredNorm();
  double sum = 0.0;
  double weighted = 0.0;
  for (double b : bandwidths_) {
    const double k = std::exp(-d2 / (2.0 * b));
    sum += k;
    weighted += k / b;
  }
  const double s = static_cast<double>(bandwidths_.size());
  slope = weighted / s;
  return sum / s;
}

Matrix gram(const Matrix& xs, const Matrix& ys, const KernelSpec& spec) {
  const MixtureKernel kernel(spec, xs, ys);
  Matrix out(xs.rows(), ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    for (Eigen::Index j = 0; j < ys.rows(); ++j) out(i, j) = kernel(xs.row(i), ys.row(j));
  }
  return out;
}

}  // namespace xmodal
