// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "expect_error.hpp"
#include "fixtures.hpp"
#include "mmknn/distill_core.hpp"
#include "oracles.hpp"

using namespace mmknn;

TEST(Softmax, UniformForEqualLogits) {
  const auto p = softmax_with_temperature(std::vector<double>{0.0, 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, KnownTwoClassValue) {
  const auto p = softmax_with_temperature(std::vector<double>{1.0, 0.0}, 1.0);
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-12);
}

TEST(Softmax, LargeTemperatureApproachesUniform) {
  const auto p = softmax_with_temperature(std::vector<double>{4.0, -2.0, 1.0}, 1e6);
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-5);
}

TEST(Softmax, StableForHugeLogits) {
  const auto p = softmax_with_temperature(std::vector<double>{1000.0, 0.0}, 1.0);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(p[1]));
}

TEST(Softmax, MatchesOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto z = fixture::random_logits(rng, 2 + i % 6);
    const double t = 0.5 + (i % 7);
    const auto p = softmax_with_temperature(z, t);
    const auto ref = oracle::softmax(z, t);
    for (std::size_t c = 0; c < z.size(); ++c) EXPECT_NEAR(p[c], ref[c], 1e-12);
  }
}

TEST(Softmax, RejectsBadInput) {
  expect_kind(ErrorKind::kInvalidHyperparameter,
              [] { softmax_with_temperature(std::vector<double>{1.0, 2.0}, 0.0); });
  expect_kind(ErrorKind::kInvalidInput,
              [] { softmax_with_temperature(std::vector<double>{1.0}, 1.0); });
  expect_kind(ErrorKind::kInvalidInput,
              [] { softmax_with_temperature(std::vector<double>{1.0, NAN}, 1.0); });
}

TEST(CrossEntropy, KnownValues) {
  EXPECT_NEAR(cross_entropy(0, std::vector<double>{0.5, 0.5}), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(1, std::vector<double>{0.1, 0.9}), -std::log(0.9), 1e-15);
}

TEST(CrossEntropy, ClampsZeroProbability) {
  EXPECT_NEAR(cross_entropy(1, std::vector<double>{1.0, 0.0}), -std::log(kProbClamp), 1e-9);
}

TEST(CrossEntropy, Errors) {
  expect_kind(ErrorKind::kLabel, [] { cross_entropy(2, std::vector<double>{0.5, 0.5}); });
  expect_kind(ErrorKind::kInvalidInput, [] { cross_entropy(0, std::vector<double>{0.5, 0.6}); });
}

TEST(KlDivergence, ZeroForIdenticalDistributions) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(kl_divergence(p, p), 0.0);
}

TEST(KlDivergence, KnownValueAndAsymmetry) {
  const std::vector<double> p{0.5, 0.5}, q{0.9, 0.1};
  EXPECT_NEAR(kl_divergence(p, q), 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-15);
  EXPECT_NE(kl_divergence(p, q), kl_divergence(q, p));
}

TEST(KlDivergence, LengthMismatch) {
  expect_kind(ErrorKind::kDimension, [] {
    kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.2, 0.3, 0.5});
  });
}

TEST(KdLoss, ZeroForIdenticalLogits) {
  const std::vector<double> z{1.0, -2.0, 0.5};
  for (double t : {1.0, 5.0, 10.0, 12.0, 20.0}) EXPECT_DOUBLE_EQ(kd_loss(z, z, t), 0.0);
}

TEST(KdLoss, CarriesTemperatureSquared) {
  const std::vector<double> zs{0.0, 0.0}, zt{2.0, 0.0};
  const double t = 4.0;
  const auto ps = softmax_with_temperature(zs, t);
  const auto pt = softmax_with_temperature(zt, t);
  EXPECT_NEAR(kd_loss(zs, zt, t), t * t * kl_divergence(pt, ps), 1e-14);
}

TEST(KdLoss, ShiftInvariant) {
  const std::vector<double> zs{0.3, -1.0, 2.0}, zt{1.0, 0.0, -1.0};
  std::vector<double> shifted = zs;
  for (double& v : shifted) v += 7.5;
  EXPECT_NEAR(kd_loss(zs, zt, 3.0), kd_loss(shifted, zt, 3.0), 1e-12);
}

TEST(CombinedLoss, EndpointsOfLambda) {
  const std::vector<double> zs{0.2, 1.0}, zt{2.0, -1.0};
  const double ce = cross_entropy(1, softmax_with_temperature(zs, 1.0));
  EXPECT_NEAR(combined_loss(1, zs, zt, {0.0, 5.0}), ce, 1e-15);
  EXPECT_NEAR(combined_loss(1, zs, zt, {1.0, 5.0}), kd_loss(zs, zt, 5.0), 1e-15);
}

TEST(CombinedLoss, RejectsLambdaOutOfRange) {
  const std::vector<double> z{0.0, 1.0};
  expect_kind(ErrorKind::kInvalidHyperparameter, [&] { combined_loss(0, z, z, {1.5, 1.0}); });
}

TEST(AugmentedLoss, HasNoCrossEntropyTerm) {
  const std::vector<double> zs{0.2, 1.0}, zt{2.0, -1.0};
  const LossTerms terms = augmented_example_terms(zs, zt, 5.0);
  EXPECT_EQ(terms.ce, 0.0);
  EXPECT_DOUBLE_EQ(terms.total, kd_loss(zs, zt, 5.0));
  EXPECT_DOUBLE_EQ(augmented_example_loss(zs, zt, 5.0), kd_loss(zs, zt, 5.0));
}

TEST(Gradients, MatchFiniteDifferencesOnLogits) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto zs = fixture::random_logits(rng, 4, 3.0);
    const auto zt = fixture::random_logits(rng, 4, 3.0);
    const KDHyperparams hp{0.25 * (i % 5), 1.0 + i % 9};
    const auto grad = combined_loss_grad(i % 4, zs, zt, hp);
    const auto numeric = oracle::numeric_gradient(zs, [&](const std::vector<double>& z) {
      return oracle::combined(i % 4, z, zt, hp.lambda, hp.temperature);
    });
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(grad[c], numeric[c], 1e-6);
  }
}

TEST(Argmax, LowestIndexOnTies) {
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{2.0, 2.0}), 0u);
}
