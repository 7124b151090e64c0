// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mmknn/distill_core.hpp"

namespace mmknn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Vector to_vector(std::span<const float> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// Activations recorded by a forward pass; activations[0] is the input and
/// activations.back() the logits.
struct ForwardTrace {
  std::vector<Vector> activations;

  const Vector& logits() const { return activations.back(); }
};

class MLPClassifier;

/// Parameter-shaped gradient accumulator.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const MLPClassifier& model);
  void set_zero();
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double scale);
  bool all_finite() const;
  double squared_norm() const;
  /// Concatenation in checkpoint order (W0, b0, W1, b1, ...).
  std::vector<double> flat() const;
};

/// Fully connected tanh network with a linear classification head.
///
/// layer_dims = {input, hidden..., classes}. Weights are stored row-major as
/// (out x in) matrices; hidden layers apply tanh, the last layer is linear.
class MLPClassifier {
 public:
  MLPClassifier() = default;

  /// Glorot-uniform weights and zero biases from a seeded generator.
  static MLPClassifier create(std::vector<std::size_t> layer_dims, std::uint64_t seed);
  static MLPClassifier zeros(std::vector<std::size_t> layer_dims);

  const std::vector<std::size_t>& layer_dims() const noexcept { return layer_dims_; }
  std::size_t num_layers() const noexcept { return weights_.size(); }
  std::size_t input_dim() const { return layer_dims_.front(); }
  std::size_t num_classes() const { return layer_dims_.back(); }
  std::size_t parameter_count() const;

  Matrix& weight(std::size_t layer) { return weights_.at(layer); }
  const Matrix& weight(std::size_t layer) const { return weights_.at(layer); }
  Vector& bias(std::size_t layer) { return biases_.at(layer); }
  const Vector& bias(std::size_t layer) const { return biases_.at(layer); }

  Logits forward(const Vector& input) const;
  ForwardTrace trace(const Vector& input) const;
  /// Last hidden layer activations. Throws kUnsupportedArchitecture for a
  /// network without hidden layers.
  std::vector<double> penultimate_repr(const Vector& input) const;

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  bool all_finite() const;

  bool operator==(const MLPClassifier& other) const;

 private:
  explicit MLPClassifier(std::vector<std::size_t> layer_dims);
  void check_input(const Vector& input) const;

  std::vector<std::size_t> layer_dims_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// Accumulates `weight` * dLoss/dparams into `grads`, given dLoss/dlogits for
/// the example that produced `trace`.
void backward(const MLPClassifier& model, const ForwardTrace& trace,
              std::span<const double> logit_grad, Gradients& grads, double weight = 1.0);

/// Bias-corrected Adam.
class AdamOptimizer {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamOptimizer(const MLPClassifier& model) : AdamOptimizer(model, Options{}) {}
  AdamOptimizer(const MLPClassifier& model, Options options);

  /// Applies one update with learning rate `lr`. Throws kTrainingDivergence on
  /// a non-finite gradient, leaving the model untouched.
  void step(MLPClassifier& model, const Gradients& grads, double lr);
  std::uint64_t steps() const noexcept { return step_; }

 private:
  Options options_;
  Gradients first_;
  Gradients second_;
  std::uint64_t step_ = 0;
};

/// Checkpoint: "MDL1", u32 layer count, u32 per layer dim, then every W (row
/// major) followed by its b, all float32 little-endian.
void save_checkpoint(const std::filesystem::path& path, const MLPClassifier& model);
MLPClassifier load_checkpoint(const std::filesystem::path& path);

}  // namespace mmknn
