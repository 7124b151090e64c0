// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "expect_error.hpp"
#include "mmknn/models.hpp"
#include "mmknn/trainer.hpp"
#include "oracles.hpp"

using namespace mmknn;

namespace {

Vector random_input(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  return v;
}

double loss_at(MLPClassifier model, const std::vector<double>& params, const Vector& x,
               std::size_t label) {
  model.set_flat_parameters(params);
  return cross_entropy(label, softmax_with_temperature(model.forward(x), 1.0));
}

}  // namespace

TEST(Forward, ZeroModelGivesZeroLogits) {
  const auto m = MLPClassifier::zeros({3, 4, 2});
  for (double z : m.forward(Vector::Ones(3))) EXPECT_EQ(z, 0.0);
}

TEST(Forward, IdentityLinearLayer) {
  auto m = MLPClassifier::zeros({3, 3});
  m.weight(0) = Matrix::Identity(3, 3);
  Vector x(3);
  x << 0.5, -1.0, 2.0;
  EXPECT_EQ(m.forward(x), (std::vector<double>{0.5, -1.0, 2.0}));
}

TEST(Forward, MatchesLoopOracle) {
  std::mt19937_64 rng(1);
  const auto m = MLPClassifier::create({6, 5, 4, 3}, 9);
  for (int i = 0; i < 20; ++i) {
    const Vector x = random_input(6, rng);
    const auto got = m.forward(x);
    const auto ref = oracle::mlp_forward(m, to_std(x));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got[c], ref[c], 1e-12);
  }
}

TEST(Forward, DimensionMismatch) {
  const auto m = MLPClassifier::create({4, 2}, 1);
  expect_kind(ErrorKind::kDimension, [&] { m.forward(Vector::Zero(5)); });
}

TEST(Init, GlorotBoundsAndDeterminism) {
  const auto a = MLPClassifier::create({10, 6, 3}, 4);
  const auto b = MLPClassifier::create({10, 6, 3}, 4);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == MLPClassifier::create({10, 6, 3}, 5));
  const double bound = std::sqrt(6.0 / 16.0);
  EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(a.bias(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PenultimateRepr, ShapeAndDeterminism) {
  const auto m = MLPClassifier::create({4, 7, 3}, 2);
  const Vector x = Vector::LinSpaced(4, -1.0, 1.0);
  const auto r = m.penultimate_repr(x);
  EXPECT_EQ(r.size(), 7u);
  EXPECT_EQ(r, m.penultimate_repr(x));
  EXPECT_NEAR(angular_distance(r, r), 0.0, 1e-12);
}

TEST(PenultimateRepr, NeedsHiddenLayer) {
  const auto m = MLPClassifier::create({4, 3}, 2);
  expect_kind(ErrorKind::kUnsupportedArchitecture, [&] { m.penultimate_repr(Vector::Ones(4)); });
}

TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const auto m = MLPClassifier::create({2, 2, 2}, 7);  // 12 parameters
  const Vector x = random_input(2, rng);
  const ForwardTrace t = m.trace(x);
  Gradients g = Gradients::zeros_like(m);
  backward(m, t, cross_entropy_grad(1, to_std(t.logits())), g);
  const auto numeric = oracle::numeric_gradient(
      m.flat_parameters(), [&](const std::vector<double>& p) { return loss_at(m, p, x, 1); },
      1e-4);
  const auto analytic = g.flat();
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double scale = std::max(1e-6, std::abs(numeric[i]) + std::abs(analytic[i]));
    EXPECT_LT(std::abs(analytic[i] - numeric[i]) / scale, 1e-3) << "parameter " << i;
  }
}

TEST(Backward, PerfectPredictionHasTinyGradient) {
  auto m = MLPClassifier::zeros({2, 2});
  m.bias(0) << 40.0, -40.0;
  const ForwardTrace t = m.trace(Vector::Zero(2));
  Gradients g = Gradients::zeros_like(m);
  backward(m, t, combined_loss_grad(0, to_std(t.logits()), to_std(t.logits()), {0.0, 1.0}), g);
  EXPECT_LT(std::sqrt(g.squared_norm()), 1e-6);
}

TEST(Backward, KdGradientVanishesAtTeacher) {
  const auto m = MLPClassifier::create({3, 4, 2}, 1);
  const ForwardTrace t = m.trace(Vector::Ones(3));
  const auto z = to_std(t.logits());
  Gradients g = Gradients::zeros_like(m);
  backward(m, t, kd_loss_grad(z, z, 5.0), g);
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = MLPClassifier::create({3, 2}, 1);
  const auto before = m.flat_parameters();
  AdamOptimizer opt(m);
  opt.step(m, Gradients::zeros_like(m), 0.1);
  EXPECT_EQ(m.flat_parameters(), before);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto m = MLPClassifier::create({3, 2}, 1);
  const auto before = m.flat_parameters();
  Gradients g = Gradients::zeros_like(m);
  g.weights[0](0, 0) = 0.3;
  g.weights[0](1, 2) = -2.0;
  AdamOptimizer opt(m);
  opt.step(m, g, 0.01);
  const auto after = m.flat_parameters();
  EXPECT_NEAR(after[0] - before[0], -0.01, 1e-6);
  EXPECT_NEAR(after[5] - before[5], 0.01, 1e-6);
}

TEST(Adam, DecreasesConvexQuadratic) {
  // Loss 0.5 * ||theta - target||^2 over the parameters of a linear model.
  auto m = MLPClassifier::create({2, 2}, 3);
  const std::vector<double> target(m.parameter_count(), 0.7);
  AdamOptimizer opt(m);
  auto loss = [&] {
    double s = 0.0;
    const auto p = m.flat_parameters();
    for (std::size_t i = 0; i < p.size(); ++i) s += 0.5 * (p[i] - target[i]) * (p[i] - target[i]);
    return s;
  };
  const double initial = loss();
  for (int step = 0; step < 200; ++step) {
    const auto p = m.flat_parameters();
    MLPClassifier grad_model = m;
    std::vector<double> diff(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) diff[i] = p[i] - target[i];
    grad_model.set_flat_parameters(diff);
    Gradients g = Gradients::zeros_like(m);
    g.weights[0] = grad_model.weight(0);
    g.biases[0] = grad_model.bias(0);
    opt.step(m, g, 0.01);
  }
  EXPECT_LT(loss(), 0.05 * initial);
}

TEST(Adam, NanGradientDiverges) {
  auto m = MLPClassifier::create({2, 2}, 3);
  Gradients g = Gradients::zeros_like(m);
  g.biases[0][0] = NAN;
  AdamOptimizer opt(m);
  expect_kind(ErrorKind::kTrainingDivergence, [&] { opt.step(m, g, 0.01); });
}

TEST(Checkpoint, RoundTripWithinFloatPrecision) {
  const auto m = MLPClassifier::create({5, 4, 3}, 8);
  const auto path = std::filesystem::temp_directory_path() / "mmknn_model.mdl";
  save_checkpoint(path, m);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.layer_dims(), m.layer_dims());
  const auto a = m.flat_parameters(), b = loaded.flat_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b[i], static_cast<double>(static_cast<float>(a[i])));
  }
}

TEST(Checkpoint, BadMagic) {
  const auto path = std::filesystem::temp_directory_path() / "mmknn_bad.mdl";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  expect_kind(ErrorKind::kFormat, [&] { load_checkpoint(path); });
}

TEST(Capacity, DefaultTeacherLargerThanStudent) {
  const DistillConfig c;
  std::vector<std::size_t> t{64}, s{64};
  t.insert(t.end(), c.teacher_hidden.begin(), c.teacher_hidden.end());
  s.insert(s.end(), c.student_hidden.begin(), c.student_hidden.end());
  t.push_back(3);
  s.push_back(3);
  EXPECT_GT(MLPClassifier::create(t, 1).parameter_count(),
            MLPClassifier::create(s, 1).parameter_count());
}
