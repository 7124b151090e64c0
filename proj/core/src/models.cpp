// SPDX-License-Identifier: Apache-2.0
#include "mmknn/models.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "mmknn/error.hpp"
#include "mmknn/random.hpp"

namespace mmknn {

Gradients Gradients::zeros_like(const MLPClassifier& model) {
  Gradients g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(model.weight(l).rows(), model.weight(l).cols()));
    g.biases.push_back(Vector::Zero(model.bias(l).size()));
  }
  return g;
}

void Gradients::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double scale) {
  for (auto& w : weights) w *= scale;
  for (auto& b : biases) b *= scale;
  return *this;
}

bool Gradients::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

double Gradients::squared_norm() const {
  double total = 0.0;
  for (const auto& w : weights) total += w.squaredNorm();
  for (const auto& b : biases) total += b.squaredNorm();
  return total;
}

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return out;
}

MLPClassifier::MLPClassifier(std::vector<std::size_t> layer_dims)
    : layer_dims_(std::move(layer_dims)) {
  if (layer_dims_.size() < 2) {
    throw Error(ErrorKind::kUnsupportedArchitecture, "need at least input and output dims");
  }
  for (std::size_t d : layer_dims_) {
    if (d == 0) throw Error(ErrorKind::kUnsupportedArchitecture, "layer dims must be positive");
  }
  if (layer_dims_.back() < 2) {
    throw Error(ErrorKind::kUnsupportedArchitecture, "classifier needs at least 2 classes");
  }
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(layer_dims_[l]);
    const auto out = static_cast<Eigen::Index>(layer_dims_[l + 1]);
    weights_.push_back(Matrix::Zero(out, in));
    biases_.push_back(Vector::Zero(out));
  }
}

MLPClassifier MLPClassifier::zeros(std::vector<std::size_t> layer_dims) {
  return MLPClassifier(std::move(layer_dims));
}

MLPClassifier MLPClassifier::create(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  MLPClassifier model(std::move(layer_dims));
  Rng rng(seed);
  for (auto& w : model.weights_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * limit;
    }
  }
  return model;
}

std::size_t MLPClassifier::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    total += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return total;
}

void MLPClassifier::check_input(const Vector& input) const {
  if (static_cast<std::size_t>(input.size()) != input_dim()) {
    throw Error(ErrorKind::kDimension, "input of dimension " + std::to_string(input.size()) +
                                           " for network expecting " +
                                           std::to_string(input_dim()));
  }
}

ForwardTrace MLPClassifier::trace(const Vector& input) const {
  check_input(input);
  ForwardTrace t;
  t.activations.reserve(weights_.size() + 1);
  t.activations.push_back(input);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Vector z = weights_[l] * t.activations.back() + biases_[l];
    if (l + 1 < weights_.size()) z = z.array().tanh().matrix();
    t.activations.push_back(std::move(z));
  }
  return t;
}

Logits MLPClassifier::forward(const Vector& input) const { return to_std(trace(input).logits()); }

std::vector<double> MLPClassifier::penultimate_repr(const Vector& input) const {
  if (weights_.size() < 2) {
    throw Error(ErrorKind::kUnsupportedArchitecture,
                "penultimate representation needs at least one hidden layer");
  }
  const ForwardTrace t = trace(input);
  return to_std(t.activations[t.activations.size() - 2]);
}

std::vector<double> MLPClassifier::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.insert(out.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    out.insert(out.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
  return out;
}

void MLPClassifier::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw Error(ErrorKind::kDimension, "expected " + std::to_string(parameter_count()) +
                                           " parameters, got " + std::to_string(values.size()));
  }
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index i = 0; i < weights_[l].size(); ++i) weights_[l].data()[i] = values[pos++];
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l][i] = values[pos++];
  }
}

bool MLPClassifier::all_finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

bool MLPClassifier::operator==(const MLPClassifier& other) const {
  if (layer_dims_ != other.layer_dims_) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  }
  return true;
}

void backward(const MLPClassifier& model, const ForwardTrace& trace,
              std::span<const double> logit_grad, Gradients& grads, double weight) {
  const std::size_t layers = model.num_layers();
  if (trace.activations.size() != layers + 1) {
    throw Error(ErrorKind::kInvalidInput, "trace does not belong to this model");
  }
  if (logit_grad.size() != model.num_classes()) {
    throw Error(ErrorKind::kDimension, "logit gradient has wrong length");
  }
  Vector delta(static_cast<Eigen::Index>(logit_grad.size()));
  for (std::size_t i = 0; i < logit_grad.size(); ++i) {
    delta[static_cast<Eigen::Index>(i)] = weight * logit_grad[i];
  }
  for (std::size_t l = layers; l-- > 0;) {
    const Vector& in = trace.activations[l];
    grads.weights[l].noalias() += delta * in.transpose();
    grads.biases[l] += delta;
    if (l > 0) {
      Vector back = model.weight(l).transpose() * delta;
      delta = back.array() * (1.0 - in.array().square());
    }
  }
}

AdamOptimizer::AdamOptimizer(const MLPClassifier& model, Options options)
    : options_(options),
      first_(Gradients::zeros_like(model)),
      second_(Gradients::zeros_like(model)) {}

void AdamOptimizer::step(MLPClassifier& model, const Gradients& grads, double lr) {
  if (grads.weights.size() != model.num_layers()) {
    throw Error(ErrorKind::kDimension, "gradient shape does not match model");
  }
  if (!grads.all_finite()) {
    throw Error(ErrorKind::kTrainingDivergence, "non-finite gradient at step " +
                                                    std::to_string(step_ + 1));
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + options_.eps);
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    update(model.weight(l), grads.weights[l], first_.weights[l], second_.weights[l]);
    update(model.bias(l), grads.biases[l], first_.biases[l], second_.biases[l]);
  }
  if (!model.all_finite()) {
    throw Error(ErrorKind::kTrainingDivergence, "parameters became non-finite");
  }
}

namespace {
constexpr std::array<char, 4> kCheckpointMagic = {'M', 'D', 'L', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const MLPClassifier& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_u32(out, static_cast<std::uint32_t>(model.layer_dims().size()));
  for (std::size_t d : model.layer_dims()) detail::write_u32(out, static_cast<std::uint32_t>(d));
  for (double x : model.flat_parameters()) detail::write_f32(out, static_cast<float>(x));
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

MLPClassifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::array<char, 4> head{};
  in.read(head.data(), head.size());
  if (in.gcount() != 4 || head != kCheckpointMagic) {
    throw Error(ErrorKind::kFormat, path.string() + ": not an MDL1 checkpoint");
  }
  const std::uint32_t count = detail::read_u32(in);
  if (count < 2 || count > 64) throw Error(ErrorKind::kFormat, "implausible layer count");
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < count; ++i) dims.push_back(detail::read_u32(in));
  MLPClassifier model = MLPClassifier::zeros(dims);
  std::vector<double> params(model.parameter_count());
  for (double& p : params) p = detail::read_f32(in);
  model.set_flat_parameters(params);
  return model;
}

}  // namespace mmknn
