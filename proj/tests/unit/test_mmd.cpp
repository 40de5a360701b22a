// SPDX-License-Identifier: Apache-2.0
#include "support/oracles.hpp"
#include "xmodal/error.hpp"
#include "xmodal/mmd.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace xmodal {
namespace {

const KernelSpec kTwo = KernelSpec::fixed(2.0);

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

FeatureSet two_point_batch() {
  FeatureSet b;
  b.features = col({0.0, 2.0});
  b.identities = {0, 0};
  b.modalities = {Modality::Visible, Modality::Thermal};
  b.identity_count = 1;
  return b;
}

TEST(Mmd2Biased, IdenticalSetsGiveZero) {
  Rng rng(21);
  const Matrix a = oracle::random_matrix(5, 3, rng);
  EXPECT_NEAR(mmd2_biased(a, a, KernelSpec::fixed(1.5)).value, 0.0, 1e-15);
}

TEST(Mmd2Biased, TwoPointClosedForm) {
  const auto e = mmd2_biased(col({0.0}), col({2.0}), kTwo);
  EXPECT_NEAR(e.value, 2.0 - 2.0 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(e.value, 1.2642411176571153, 1e-12);
  EXPECT_NEAR(e.value, e.same_x_term + e.same_y_term - 2.0 * e.cross_term, 1e-15);
}

TEST(Mmd2Biased, AllPointsIdentical) {
  EXPECT_NEAR(mmd2_biased(col({0.0, 0.0}), col({0.0}), KernelSpec::fixed(1.0)).value, 0.0, 1e-15);
}

TEST(Mmd2Unbiased, DuplicatedPointGivesZero) {
  EXPECT_NEAR(mmd2_unbiased(col({1.0, 1.0}), col({1.0, 1.0}), KernelSpec::fixed(1.0)).value, 0.0, 1e-15);
}

TEST(Mmd2Unbiased, HandWorkedExample) {
  const auto e = mmd2_unbiased(col({0.0, 1.0}), col({3.0, 4.0}), KernelSpec::fixed(0.5));
  const double cross = (std::exp(-9.0) + std::exp(-16.0) + std::exp(-4.0) + std::exp(-9.0)) / 4.0;
  EXPECT_NEAR(e.same_x_term, std::exp(-1.0), 1e-15);
  EXPECT_NEAR(e.same_y_term, std::exp(-1.0), 1e-15);
  EXPECT_NEAR(e.cross_term, cross, 1e-15);
  EXPECT_NEAR(e.value, 2.0 * std::exp(-1.0) - 2.0 * cross, 1e-14);
  EXPECT_NEAR(e.value, 0.7264775968268435, 1e-12);
}

TEST(Mmd2Unbiased, CanBeNegative) {
  // Same-set pairs far apart, cross pairs close: the U-statistic dips below 0.
  const auto e = mmd2_unbiased(col({0.0, 4.0}), col({0.1, 4.1}), KernelSpec::fixed(1.0));
  EXPECT_LT(e.value, 0.0);
}

TEST(Mmd2Unbiased, NeedsTwoSamplesPerSet) {
  EXPECT_THROW(mmd2_unbiased(col({0.0}), col({1.0, 2.0}), kTwo), Error);
}

TEST(Mmd2, RejectsDimensionMismatch) {
  Rng rng(22);
  EXPECT_THROW(mmd2_biased(oracle::random_matrix(2, 2, rng), oracle::random_matrix(2, 3, rng), kTwo), Error);
}

TEST(Mmd2, MatchesDoubleLoopOracle) {
  Rng rng(23);
  std::uniform_int_distribution<int> size(2, 10), dim(1, 5);
  for (int t = 0; t < 200; ++t) {
    const Matrix xs = oracle::random_matrix(size(rng), dim(rng), rng);
    const Matrix ys = oracle::random_matrix(size(rng), xs.cols(), rng, 1.5);
    const KernelSpec fixed = KernelSpec::fixed(0.5 + t % 3, {0.5, 1.0, 2.0});
    const std::vector<double> bw = {0.5 * fixed.sigma_squared, fixed.sigma_squared, 2.0 * fixed.sigma_squared};
    EXPECT_NEAR(mmd2_biased(xs, ys, fixed).value, oracle::mmd2(xs, ys, bw, false), 1e-10);
    EXPECT_NEAR(mmd2_unbiased(xs, ys, fixed).value, oracle::mmd2(xs, ys, bw, true), 1e-10);

    Matrix both(xs.rows() + ys.rows(), xs.cols());
    both << xs, ys;
    const double med = oracle::median_bandwidth(both);
    const std::vector<double> mbw = {0.25 * med, 0.5 * med, med, 2.0 * med, 4.0 * med};
    EXPECT_NEAR(mmd2_biased(xs, ys, KernelSpec::median_heuristic()).value, oracle::mmd2(xs, ys, mbw, false), 1e-10);
  }
}

TEST(Mmd2, GradientMatchesFiniteDifferences) {
  Rng rng(24);
  for (int t = 0; t < 30; ++t) {
    const Matrix xs = oracle::random_matrix(2 + t % 4, 1 + t % 3, rng);
    const Matrix ys = oracle::random_matrix(3 + t % 3, xs.cols(), rng);
    const MixtureKernel k(std::vector<double>{0.7, 1.4});
    for (auto est : {Estimator::Biased, Estimator::Unbiased}) {
      Matrix gx, gy;
      mmd2_with_grad(xs, ys, k, est, &gx, &gy);
      const Matrix fx = oracle::central_diff(
          [&](const Matrix& m) { return mmd2_with_grad(m, ys, k, est, nullptr, nullptr).value; }, xs);
      const Matrix fy = oracle::central_diff(
          [&](const Matrix& m) { return mmd2_with_grad(xs, m, k, est, nullptr, nullptr).value; }, ys);
      EXPECT_LT(oracle::max_rel_error(fx, gx), 1e-4);
      EXPECT_LT(oracle::max_rel_error(fy, gy), 1e-4);
    }
  }
}

TEST(LossMmdMarginal, IdenticalModalitiesGiveZeroLossAndGradient) {
  Rng rng(25);
  FeatureSet b = oracle::random_batch(3, 2, 4, rng);
  for (std::size_t r = 0; r < b.size(); r += 4) {
    b.features.row(static_cast<Eigen::Index>(r + 2)) = b.features.row(static_cast<Eigen::Index>(r));
    b.features.row(static_cast<Eigen::Index>(r + 3)) = b.features.row(static_cast<Eigen::Index>(r + 1));
  }
  const auto out = loss_mmd_marginal(b, KernelSpec::fixed(1.0));
  EXPECT_NEAR(out.loss, 0.0, 1e-15);
  EXPECT_LT(out.grads.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LossMmdMarginal, TwoPointValueAndGradient) {
  const auto out = loss_mmd_marginal(two_point_batch(), kTwo);
  EXPECT_NEAR(out.loss, 1.2642411176571153, 1e-12);
  // The visible point is pulled towards the thermal one: descending the loss moves it to +x.
  EXPECT_NEAR(out.grads(0, 0), -2.0 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(out.grads(1, 0), 2.0 * std::exp(-1.0), 1e-12);
}

TEST(LossMmdId, SingleIdentityEqualsMarginal) {
  Rng rng(26);
  const FeatureSet b = oracle::random_batch(1, 3, 2, rng);
  const auto a = loss_mmd_id(b, KernelSpec::fixed(1.0));
  const auto m = loss_mmd_marginal(b, KernelSpec::fixed(1.0));
  EXPECT_NEAR(a.loss, m.loss, 1e-15);
  EXPECT_LT((a.grads - m.grads).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LossMmdId, AveragesPerClassOracle) {
  Rng rng(27);
  const FeatureSet b = oracle::random_batch(2, 3, 3, rng);
  const std::vector<double> bw = {1.0};
  double expect = 0.0;
  for (int id = 0; id < 2; ++id) {
    expect += 0.5 * oracle::mmd2(gather_rows(b.features, b.rows_where(id, Modality::Visible)),
                                 gather_rows(b.features, b.rows_where(id, Modality::Thermal)), bw, false);
  }
  EXPECT_NEAR(loss_mmd_id(b, KernelSpec::fixed(1.0)).loss, expect, 1e-12);
}

TEST(LossMmdId, MatchedClassesGiveZero) {
  Rng rng(28);
  FeatureSet b = oracle::random_batch(2, 2, 3, rng);
  for (std::size_t r = 0; r < b.size(); r += 4) {
    b.features.row(static_cast<Eigen::Index>(r + 2)) = b.features.row(static_cast<Eigen::Index>(r + 1));
    b.features.row(static_cast<Eigen::Index>(r + 3)) = b.features.row(static_cast<Eigen::Index>(r));
  }
  EXPECT_NEAR(loss_mmd_id(b, KernelSpec::fixed(1.0)).loss, 0.0, 1e-15);
}

TEST(LossMmdId, MissingModalityIsAnError) {
  Rng rng(29);
  FeatureSet b = oracle::random_batch(2, 2, 3, rng);
  b.modalities[2] = Modality::Visible;
  b.modalities[3] = Modality::Visible;
  try {
    loss_mmd_id(b, KernelSpec::fixed(1.0));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_modality);
    EXPECT_NE(std::string(e.what()).find("identity 0"), std::string::npos);
  }
}

TEST(LossMarginMmdId, GateClosedAtRhoAboveClassMmd) {
  const auto r = loss_margin_mmd_id(two_point_batch(), kTwo, MarginConfig{1.4});
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.active_classes, 0);
  EXPECT_TRUE(r.grads.isZero(0.0));
  ASSERT_EQ(r.class_mmd.size(), 1u);
  EXPECT_NEAR(r.class_mmd[0], 1.2642411176571153, 1e-12);
}

TEST(LossMarginMmdId, FullValuePassesAboveMargin) {
  const auto r = loss_margin_mmd_id(two_point_batch(), kTwo, MarginConfig{1.0});
  EXPECT_NEAR(r.loss, 1.2642411176571153, 1e-12);
  EXPECT_EQ(r.active_classes, 1);
}

TEST(LossMarginMmdId, SoftHingeSubtractsMargin) {
  const auto r = loss_margin_mmd_id(two_point_batch(), kTwo, MarginConfig{1.0, true});
  EXPECT_NEAR(r.loss, 0.2642411176571153, 1e-12);
}

TEST(LossMarginMmdId, ZeroMarginIsBitwiseMmdId) {
  Rng rng(30);
  for (int t = 0; t < 20; ++t) {
    const FeatureSet b = oracle::random_batch(2 + t % 3, 2 + t % 2, 3, rng);
    for (auto est : {Estimator::Biased, Estimator::Unbiased}) {
      const MmdOptions opts{est, nullptr};
      const auto a = loss_margin_mmd_id(b, KernelSpec::fixed(1.0, {0.5, 1.0}), MarginConfig{0.0}, opts);
      const auto m = loss_mmd_id(b, KernelSpec::fixed(1.0, {0.5, 1.0}), opts);
      EXPECT_EQ(a.loss, m.loss);
      EXPECT_EQ(a.grads, m.grads);
    }
  }
}

TEST(LossMarginMmdId, NonIncreasingInRho) {
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const FeatureSet b = oracle::random_batch(4, 2, 2, rng, 1.0 + t % 3);
    double prev = INFINITY;
    for (double rho = 0.0; rho <= 2.0; rho += 0.1) {
      const double l = loss_margin_mmd_id(b, KernelSpec::fixed(0.5), MarginConfig{rho}).loss;
      EXPECT_LE(l, prev);
      prev = l;
    }
  }
}

TEST(LossMarginMmdId, GatedClassesHaveExactlyZeroGradient) {
  Rng rng(32);
  int mixed = 0;
  for (int t = 0; t < 50; ++t) {
    FeatureSet b = oracle::random_batch(3, 2, 2, rng, 0.3);
    // Push identity 0's thermal block away so that it alone exceeds the margin.
    for (auto r : b.rows_where(0, Modality::Thermal)) b.features(static_cast<Eigen::Index>(r), 0) += 3.0;
    const auto res = loss_margin_mmd_id(b, KernelSpec::fixed(0.5), MarginConfig{1.0});
    for (std::size_t c = 0; c < res.class_identities.size(); ++c) {
      if (res.class_mmd[c] > 1.0) continue;
      for (auto m : {Modality::Visible, Modality::Thermal}) {
        for (auto r : b.rows_where(res.class_identities[c], m)) {
          EXPECT_TRUE(res.grads.row(static_cast<Eigen::Index>(r)).isZero(0.0));
        }
      }
    }
    if (res.active_classes > 0 && res.active_classes < 3) ++mixed;
  }
  EXPECT_GT(mixed, 10);
}

class ClassLossGradient : public ::testing::TestWithParam<int> {};

TEST_P(ClassLossGradient, MatchesFiniteDifferences) {
  const int t = GetParam();
  Rng rng(static_cast<std::uint64_t>(400 + t));
  const FeatureSet b = oracle::random_batch(2 + t % 3, 2 + t % 2, 1 + t % 4, rng, 0.8);
  const KernelSpec spec = KernelSpec::fixed(0.8, {0.5, 1.0, 2.0});
  const MmdOptions opts{t % 2 ? Estimator::Unbiased : Estimator::Biased, nullptr};
  auto eval = [&](int which, const Matrix& f) {
    const FeatureSet x = b.with_features(f);
    if (which == 0) return loss_mmd_marginal(x, spec, opts).loss;
    if (which == 1) return loss_mmd_id(x, spec, opts).loss;
    return loss_margin_mmd_id(x, spec, MarginConfig{0.4}, opts).loss;
  };
  const Matrix analytic[3] = {loss_mmd_marginal(b, spec, opts).grads, loss_mmd_id(b, spec, opts).grads,
                              loss_margin_mmd_id(b, spec, MarginConfig{0.4}, opts).grads};
  for (int which = 0; which < 3; ++which) {
    // The clamp on the reported unbiased loss is not differentiated; skip
    // configurations sitting at or below zero.
    if (opts.estimator == Estimator::Unbiased && eval(which, b.features) <= 0.0) continue;
    const Matrix fd = oracle::central_diff([&](const Matrix& f) { return eval(which, f); }, b.features);
    EXPECT_LT(oracle::max_rel_error(fd, analytic[which]), 1e-4) << "loss " << which;
  }
}

INSTANTIATE_TEST_SUITE_P(Batches, ClassLossGradient, ::testing::Range(0, 24));

TEST(CostCounter, ClassConditionalPairs) {
  for (auto [p, k] : {std::pair{4, 4}, std::pair{2, 3}, std::pair{8, 2}}) {
    Rng rng(33);
    const FeatureSet b = oracle::random_batch(p, k, 3, rng);
    CostCounter c;
    loss_mmd_id(b, KernelSpec::fixed(1.0), MmdOptions{Estimator::Unbiased, &c});
    EXPECT_EQ(c.kernel_pairs, static_cast<std::uint64_t>(p * k * (2 * k - 1)));
  }
}

TEST(MarginConfig, RejectsNegativeRho) {
  EXPECT_THROW(MarginConfig{-0.1}.validate(), Error);
}

}  // namespace
}  // namespace xmodal
