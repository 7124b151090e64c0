// SPDX-License-Identifier: Apache-2.0
#include "mmknn/distill_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmknn/error.hpp"

namespace mmknn {
namespace {

void check_logits(std::span<const double> logits) {
  if (logits.size() < 2) {
    throw Error(ErrorKind::kInvalidInput,
                "logit vector needs at least 2 classes, got " + std::to_string(logits.size()));
  }
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error(ErrorKind::kInvalidInput, "non-finite logit");
  }
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::kInvalidHyperparameter,
                "temperature must be positive, got " + std::to_string(temperature));
  }
}

void check_probs(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + kProbSumTolerance) {
      throw Error(ErrorKind::kInvalidInput, "probability out of [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw Error(ErrorKind::kInvalidInput,
                "probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
}

void check_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::kDimension,
                "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

void KDHyperparams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::kInvalidHyperparameter,
                "lambda must lie in [0,1], got " + std::to_string(lambda));
  }
  check_temperature(temperature);
}

Probs softmax_with_temperature(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  check_logits(logits);
  const double peak = *std::max_element(logits.begin(), logits.end());
  Probs out(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - peak) / temperature);
    denom += out[i];
  }
  for (double& p : out) p /= denom;
  return out;
}

double cross_entropy(std::size_t gold_label, std::span<const double> probs) {
  if (gold_label >= probs.size()) {
    throw Error(ErrorKind::kLabel, "label " + std::to_string(gold_label) +
                                       " out of range for " + std::to_string(probs.size()) +
                                       " classes");
  }
  check_probs(probs);
  return -std::log(std::max(probs[gold_label], kProbClamp));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  check_same_length(p.size(), q.size());
  check_probs(p);
  check_probs(q);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    total += p[i] * std::log(p[i] / std::max(q[i], kProbClamp));
  }
  return total;
}

double kd_loss(std::span<const double> student_logits, std::span<const double> teacher_logits,
               double temperature) {
  check_same_length(student_logits.size(), teacher_logits.size());
  const Probs teacher = softmax_with_temperature(teacher_logits, temperature);
  const Probs student = softmax_with_temperature(student_logits, temperature);
  return temperature * temperature * kl_divergence(teacher, student);
}

double combined_loss(std::size_t gold_label, std::span<const double> student_logits,
                     std::span<const double> teacher_logits, const KDHyperparams& hp) {
  return original_example_terms(gold_label, student_logits, teacher_logits, hp).total;
}

double augmented_example_loss(std::span<const double> student_logits,
                              std::span<const double> teacher_logits, double temperature) {
  return kd_loss(student_logits, teacher_logits, temperature);
}

LossTerms original_example_terms(std::size_t gold_label, std::span<const double> student_logits,
                                 std::span<const double> teacher_logits,
                                 const KDHyperparams& hp) {
  hp.validate();
  LossTerms terms;
  terms.ce = cross_entropy(gold_label, softmax_with_temperature(student_logits, 1.0));
  terms.kd = kd_loss(student_logits, teacher_logits, hp.temperature);
  terms.total = (1.0 - hp.lambda) * terms.ce + hp.lambda * terms.kd;
  return terms;
}

LossTerms augmented_example_terms(std::span<const double> student_logits,
                                  std::span<const double> teacher_logits, double temperature) {
  LossTerms terms;
  terms.kd = augmented_example_loss(student_logits, teacher_logits, temperature);
  terms.total = terms.kd;
  return terms;
}

std::vector<double> cross_entropy_grad(std::size_t gold_label,
                                       std::span<const double> student_logits) {
  if (gold_label >= student_logits.size()) {
    throw Error(ErrorKind::kLabel, "label " + std::to_string(gold_label) + " out of range");
  }
  std::vector<double> grad = softmax_with_temperature(student_logits, 1.0);
  grad[gold_label] -= 1.0;
  return grad;
}

std::vector<double> kd_loss_grad(std::span<const double> student_logits,
                                 std::span<const double> teacher_logits, double temperature) {
  check_same_length(student_logits.size(), teacher_logits.size());
  const Probs teacher = softmax_with_temperature(teacher_logits, temperature);
  std::vector<double> grad = softmax_with_temperature(student_logits, temperature);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = temperature * (grad[i] - teacher[i]);
  }
  return grad;
}

std::vector<double> combined_loss_grad(std::size_t gold_label,
                                       std::span<const double> student_logits,
                                       std::span<const double> teacher_logits,
                                       const KDHyperparams& hp) {
  hp.validate();
  std::vector<double> grad = cross_entropy_grad(gold_label, student_logits);
  const std::vector<double> kd = kd_loss_grad(student_logits, teacher_logits, hp.temperature);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = (1.0 - hp.lambda) * grad[i] + hp.lambda * kd[i];
  }
  return grad;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kInvalidInput, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace mmknn
