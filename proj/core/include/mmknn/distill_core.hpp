// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mmknn {

/// Probability floor applied before taking logarithms.
inline constexpr double kProbClamp = 1e-12;
/// Allowed deviation of a probability vector's sum from one.
inline constexpr double kProbSumTolerance = 1e-6;

using Logits = std::vector<double>;
using Probs = std::vector<double>;

/// Mixing weight and softening temperature of the distillation objective.
struct KDHyperparams {
  double lambda = 0.5;
  double temperature = 1.0;

  /// Throws kInvalidHyperparameter unless 0 <= lambda <= 1 and temperature > 0.
  void validate() const;
};

/// Loss value split into its gold-label and distillation parts.
/// `total` is what the optimizer sees: (1 - lambda) * ce + lambda * kd for
/// original examples and kd alone for augmented ones.
struct LossTerms {
  double ce = 0.0;
  double kd = 0.0;
  double total = 0.0;
};

/// softmax(z / T) with max subtraction. Requires at least two finite logits.
Probs softmax_with_temperature(std::span<const double> logits, double temperature);

/// -log(max(probs[label], 1e-12)).
double cross_entropy(std::size_t gold_label, std::span<const double> probs);

/// sum_i p_i ln(p_i / q_i), with 0 ln 0 = 0 and q floored at 1e-12.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// T^2 KL(softmax(z_t / T) || softmax(z_s / T)). The teacher distribution is the
/// reference (first) argument of the divergence.
double kd_loss(std::span<const double> student_logits,
               std::span<const double> teacher_logits, double temperature);

/// (1 - lambda) CE(y, softmax(z_s)) + lambda kd_loss(z_s, z_t, T).
double combined_loss(std::size_t gold_label, std::span<const double> student_logits,
                     std::span<const double> teacher_logits, const KDHyperparams& hp);

/// Loss on unlabelled augmented inputs: distillation term only.
double augmented_example_loss(std::span<const double> student_logits,
                              std::span<const double> teacher_logits,
                              double temperature);

// Gradients with respect to the student logits.

LossTerms original_example_terms(std::size_t gold_label,
                                 std::span<const double> student_logits,
                                 std::span<const double> teacher_logits,
                                 const KDHyperparams& hp);
LossTerms augmented_example_terms(std::span<const double> student_logits,
                                  std::span<const double> teacher_logits,
                                  double temperature);

/// d CE / d z_s = softmax(z_s) - onehot(y).
std::vector<double> cross_entropy_grad(std::size_t gold_label,
                                       std::span<const double> student_logits);
/// d kd_loss / d z_s = T (softmax(z_s / T) - softmax(z_t / T)).
std::vector<double> kd_loss_grad(std::span<const double> student_logits,
                                 std::span<const double> teacher_logits,
                                 double temperature);
std::vector<double> combined_loss_grad(std::size_t gold_label,
                                       std::span<const double> student_logits,
                                       std::span<const double> teacher_logits,
                                       const KDHyperparams& hp);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace mmknn
