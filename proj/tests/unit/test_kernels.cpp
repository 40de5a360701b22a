// SPDX-License-Identifier: Apache-2.0
#include "support/oracles.hpp"
#include "xmodal/error.hpp"
#include "xmodal/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

namespace xmodal {
namespace {

RowVector vec(std::initializer_list<double> v) {
  RowVector r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

TEST(RbfKernel, ZeroDistanceIsOne) {
  const RowVector x = vec({0.3, -1.2, 4.0});
  EXPECT_EQ(rbf_kernel(x, x, 1.0), 1.0);
}

TEST(RbfKernel, ClosedFormValues) {
  EXPECT_NEAR(rbf_kernel(vec({0.0}), vec({2.0}), 2.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(rbf_kernel(vec({1.0, 0.0}), vec({0.0, 1.0}), 1.0), std::exp(-1.0), 1e-15);
}

TEST(RbfKernel, RejectsBadInputs) {
  EXPECT_THROW(rbf_kernel(vec({0.0}), vec({1.0, 2.0}), 1.0), Error);
  EXPECT_THROW(rbf_kernel(vec({0.0}), vec({1.0}), 0.0), Error);
  EXPECT_THROW(rbf_kernel(vec({0.0}), vec({1.0}), -1.0), Error);
}

TEST(MedianHeuristic, TwoPointsGiveTheirSquaredDistance) {
  const Matrix pts = (Matrix(2, 2) << 0.0, 0.0, 3.0, 4.0).finished();
  EXPECT_EQ(median_heuristic_bandwidth(pts), 25.0);
}

TEST(MedianHeuristic, ThreeCollinearPoints) {
  const Matrix pts = (Matrix(3, 1) << 0.0, 1.0, 3.0).finished();
  EXPECT_EQ(median_heuristic_bandwidth(pts), 4.0);
}

TEST(MedianHeuristic, IdenticalPointsFallBackToOne) {
  const Matrix pts = Matrix::Constant(5, 3, 2.0);
  EXPECT_EQ(median_heuristic_bandwidth(pts), 1.0);
}

TEST(MedianHeuristic, MatchesOracleOnRandomSets) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const Matrix pts = oracle::random_matrix(2 + t % 9, 1 + t % 4, rng);
    EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(pts), oracle::median_bandwidth(pts));
  }
}

TEST(Gram, SelfGramIsSymmetricWithUnitDiagonal) {
  Rng rng(12);
  const Matrix a = oracle::random_matrix(6, 3, rng);
  for (const auto& spec : {KernelSpec::fixed(0.7), KernelSpec::median_heuristic()}) {
    const Matrix g = gram(a, a, spec);
    for (Eigen::Index i = 0; i < 6; ++i) {
      EXPECT_NEAR(g(i, i), 1.0, 1e-15);
      for (Eigen::Index j = 0; j < 6; ++j) EXPECT_EQ(g(i, j), g(j, i));
    }
  }
}

TEST(Gram, SingleScaleMatchesPointwiseKernel) {
  Rng rng(13);
  const Matrix a = oracle::random_matrix(4, 2, rng);
  const Matrix b = oracle::random_matrix(3, 2, rng);
  const Matrix g = gram(a, b, KernelSpec::fixed(1.3));
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(g(i, j), rbf_kernel(a.row(i), b.row(j), 1.3));
}

TEST(Gram, TwoScaleMixtureClosedForm) {
  const Matrix x = (Matrix(1, 1) << 0.0).finished();
  const Matrix y = (Matrix(1, 1) << 2.0).finished();
  const Matrix g = gram(x, y, KernelSpec::fixed(2.0, {1.0, 2.0}));
  EXPECT_NEAR(g(0, 0), 0.5 * (std::exp(-1.0) + std::exp(-0.5)), 1e-15);
  EXPECT_NEAR(g(0, 0), 0.4872050504420379, 1e-15);
}

TEST(Gram, TransposeSymmetry) {
  Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = oracle::random_matrix(1 + t % 5, 3, rng);
    const Matrix b = oracle::random_matrix(2 + t % 4, 3, rng);
    for (const auto& spec : {KernelSpec::fixed(2.0, {0.5, 1.0}), KernelSpec::median_heuristic()}) {
      const Matrix ab = gram(a, b, spec);
      const Matrix ba = gram(b, a, spec);
      EXPECT_LT((ab - ba.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(Gram, SelfGramIsPositiveSemidefinite) {
  Rng rng(15);
  for (int t = 0; t < 40; ++t) {
    const Matrix a = oracle::random_matrix(2 + t % 7, 1 + t % 3, rng);
    const Matrix g = gram(a, a, t % 2 ? KernelSpec::fixed(0.5, {0.25, 1.0, 4.0}) : KernelSpec::median_heuristic());
    const Eigen::MatrixXd sym = g;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(Gram, OffDiagonalEntriesGrowWithBandwidth) {
  Rng rng(16);
  const Matrix a = oracle::random_matrix(5, 2, rng);
  Matrix prev = gram(a, a, KernelSpec::fixed(0.1));
  for (double s2 : {0.3, 1.0, 3.0, 10.0}) {
    const Matrix cur = gram(a, a, KernelSpec::fixed(s2));
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 5; ++j)
        if (i != j) EXPECT_GT(cur(i, j), prev(i, j));
    prev = cur;
  }
}

TEST(MixtureKernel, SlopeIsTheDerivative) {
  Rng rng(17);
  const MixtureKernel k(std::vector<double>{0.5, 2.0});
  const Matrix x = oracle::random_matrix(1, 3, rng);
  const Matrix y = oracle::random_matrix(1, 3, rng);
  double slope = 0.0;
  k.value_and_slope(x.row(0), y.row(0), slope);
  const Matrix fd = oracle::central_diff([&](const Matrix& m) { return k(m.row(0), y.row(0)); }, x);
  const Matrix analytic = slope * (y - x);
  EXPECT_LT(oracle::max_rel_error(fd, analytic), 1e-6);
}

TEST(KernelSpec, ValidationRejectsNonsense) {
  EXPECT_THROW(KernelSpec::fixed(0.0).validate(), Error);
  EXPECT_THROW(KernelSpec::fixed(1.0, {}).validate(), Error);
  EXPECT_THROW(KernelSpec::fixed(1.0, {1.0, -2.0}).validate(), Error);
  EXPECT_NO_THROW(KernelSpec::median_heuristic().validate());
}

}  // namespace
}  // namespace xmodal
