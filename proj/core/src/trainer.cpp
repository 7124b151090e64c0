// SPDX-License-Identifier: Apache-2.0
#include "mmknn/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mmknn/error.hpp"
#include "mmknn/random.hpp"

namespace mmknn {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Stream identifiers for derive_seed; every random decision of a run flows
// from config.seed through one of these.
enum SeedStream : std::uint64_t {
  kTeacherInit = 1,
  kStudentInit = 2,
  kShuffle = 3,
  kRandomPool = 4,
  kFewShot = 5,
};

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

double parse_double(std::string_view key, std::string_view value) {
  if (value == "inf" || value == "infinity" || value == "Inf") {
    return std::numeric_limits<double>::infinity();
  }
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorKind::kConfig, std::string(key) + ": not a number: " + std::string(value));
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorKind::kConfig, std::string(key) + ": not an integer: " + std::string(value));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorKind::kConfig, std::string(key) + ": not a boolean: " + std::string(value));
}

std::vector<std::size_t> parse_dims(std::string_view key, std::string_view value) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start < value.size()) {
    std::size_t end = value.find(',', start);
    if (end == std::string_view::npos) end = value.size();
    dims.push_back(parse_int<std::size_t>(key, value.substr(start, end - start)));
    start = end + 1;
  }
  return dims;
}

std::string format_dims(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kNoAug: return "no_aug";
    case Mode::kKdOnly: return "kd_only";
    case Mode::kVanillaKnn: return "vanilla_knn";
    case Mode::kMinimaxKnn: return "minimax_knn";
    case Mode::kRandomAug: return "random_aug";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "no_aug") return Mode::kNoAug;
  if (text == "kd_only" || text == "kd") return Mode::kKdOnly;
  if (text == "vanilla_knn" || text == "vanilla") return Mode::kVanillaKnn;
  if (text == "minimax_knn" || text == "minimax") return Mode::kMinimaxKnn;
  if (text == "random_aug" || text == "random") return Mode::kRandomAug;
  throw Error(ErrorKind::kConfig, "unknown mode: " + std::string(text));
}

bool uses_augmentation(Mode mode) {
  return mode == Mode::kVanillaKnn || mode == Mode::kMinimaxKnn || mode == Mode::kRandomAug;
}

void DistillConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0,1]");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (!(score_temperature > 0.0)) fail("score_temperature must be positive");
  if (k == 0) fail("k must be at least 1");
  if (n > k) fail("n (" + std::to_string(n) + ") must not exceed k (" + std::to_string(k) + ")");
  if (std::isnan(epsilon) || epsilon < 0.0) fail("epsilon must be >= 0 or inf");
  if (aug_start_epoch < 0) fail("aug_start_epoch must be >= 0");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (early_stop_patience < 1) fail("early_stop_patience must be >= 1");
  if (!(base_lr > 0.0)) fail("base_lr must be positive");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) fail("warmup_fraction must lie in (0,1)");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (retrieval_depth != 0 && retrieval_depth < k) fail("retrieval_depth must be 0 or >= k");
  if (threads < 1) fail("threads must be >= 1");
  for (std::size_t d : teacher_hidden) {
    if (d == 0) fail("teacher hidden sizes must be positive");
  }
  for (std::size_t d : student_hidden) {
    if (d == 0) fail("student hidden sizes must be positive");
  }
  if (teacher_hidden.empty()) fail("the teacher needs a hidden layer for its representation");
}

void write_manifest(std::ostream& out, const DistillConfig& c) {
  out << "lambda=" << format_double(c.lambda) << '\n'
      << "temperature=" << format_double(c.temperature) << '\n'
      << "k=" << c.k << '\n'
      << "n=" << c.n << '\n'
      << "epsilon=" << format_double(c.epsilon) << '\n'
      << "aug_start_epoch=" << c.aug_start_epoch << '\n'
      << "max_epochs=" << c.max_epochs << '\n'
      << "early_stop_patience=" << c.early_stop_patience << '\n'
      << "base_lr=" << format_double(c.base_lr) << '\n'
      << "warmup_fraction=" << format_double(c.warmup_fraction) << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "seed=" << c.seed << '\n'
      << "mode=" << to_string(c.mode) << '\n'
      << "rerank_by_teacher=" << (c.rerank_by_teacher ? "true" : "false") << '\n'
      << "score_temperature=" << format_double(c.score_temperature) << '\n'
      << "reselect_every_step=" << (c.reselect_every_step ? "true" : "false") << '\n'
      << "retrieval_depth=" << c.retrieval_depth << '\n'
      << "threads=" << c.threads << '\n'
      << "teacher_hidden=" << format_dims(c.teacher_hidden) << '\n'
      << "student_hidden=" << format_dims(c.student_hidden) << '\n';
}

void apply_setting(DistillConfig& c, std::string_view key, std::string_view value) {
  if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "temperature") c.temperature = parse_double(key, value);
  else if (key == "k") c.k = parse_int<std::size_t>(key, value);
  else if (key == "n") c.n = parse_int<std::size_t>(key, value);
  else if (key == "epsilon") c.epsilon = parse_double(key, value);
  else if (key == "aug_start_epoch") c.aug_start_epoch = parse_int<int>(key, value);
  else if (key == "max_epochs") c.max_epochs = parse_int<int>(key, value);
  else if (key == "early_stop_patience") c.early_stop_patience = parse_int<int>(key, value);
  else if (key == "base_lr") c.base_lr = parse_double(key, value);
  else if (key == "warmup_fraction") c.warmup_fraction = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = parse_int<std::size_t>(key, value);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "mode") c.mode = parse_mode(value);
  else if (key == "rerank_by_teacher") c.rerank_by_teacher = parse_bool(key, value);
  else if (key == "score_temperature") c.score_temperature = parse_double(key, value);
  else if (key == "reselect_every_step") c.reselect_every_step = parse_bool(key, value);
  else if (key == "retrieval_depth") c.retrieval_depth = parse_int<std::size_t>(key, value);
  else if (key == "threads") c.threads = parse_int<std::size_t>(key, value);
  else if (key == "teacher_hidden") c.teacher_hidden = parse_dims(key, value);
  else if (key == "student_hidden") c.student_hidden = parse_dims(key, value);
  else throw Error(ErrorKind::kConfig, "unknown setting: " + std::string(key));
}

double lr_at(std::size_t step, std::size_t total_steps, double warmup_fraction, double base_lr) {
  if (total_steps == 0) throw Error(ErrorKind::kConfig, "schedule needs at least one step");
  if (step > total_steps) {
    throw Error(ErrorKind::kConfig, "step " + std::to_string(step) + " beyond schedule end " +
                                        std::to_string(total_steps));
  }
  const auto warmup = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps))));
  if (step < warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return 0.0;
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

FeatureSet featurize(const std::vector<LabeledExample>& examples,
                     const HashedNgramEmbedder& embedder) {
  FeatureSet out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({ex.id, to_vector(embedder.embed(ex.text)), ex.label});
  }
  return out;
}

double accuracy(const MLPClassifier& model, const FeatureSet& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    if (argmax(model.forward(ex.features)) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["dev_accuracy"] = r.dev_accuracy;
  j["forward_pass_count"] = r.forward_pass_count;
  j["backward_pass_count"] = r.backward_pass_count;
  j["original_forward"] = r.original_forward;
  j["original_backward"] = r.original_backward;
  j["augmented_forward"] = r.augmented_forward;
  j["augmented_backward"] = r.augmented_backward;
  j["scored_examples"] = r.scored_examples;
  j["wall_time"] = r.wall_time;
  j["augmented_wall_time"] = r.augmented_wall_time;
  return j.dump();
}

EpochRecord epoch_record_from_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.dev_accuracy = j.at("dev_accuracy").get<double>();
    r.forward_pass_count = j.at("forward_pass_count").get<std::size_t>();
    r.backward_pass_count = j.at("backward_pass_count").get<std::size_t>();
    r.original_forward = j.at("original_forward").get<std::size_t>();
    r.original_backward = j.at("original_backward").get<std::size_t>();
    r.augmented_forward = j.at("augmented_forward").get<std::size_t>();
    r.augmented_backward = j.at("augmented_backward").get<std::size_t>();
    r.scored_examples = j.at("scored_examples").get<std::size_t>();
    r.wall_time = j.at("wall_time").get<double>();
    r.augmented_wall_time = j.at("augmented_wall_time").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("epoch record: ") + e.what());
  }
}

std::vector<EpochRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find("\"summary\"") != std::string::npos) continue;
    out.push_back(epoch_record_from_json_line(line));
  }
  return out;
}

namespace {

// Shared epoch loop for teacher and student training.
class TrainingLoop {
 public:
  TrainingLoop(MLPClassifier model, const FeatureSet& train, const FeatureSet& dev,
               const DistillConfig& config, const TrainHooks& hooks)
      : model_(std::move(model)),
        optimizer_(model_),
        train_(train),
        dev_(dev),
        config_(config),
        hooks_(hooks),
        grads_(Gradients::zeros_like(model_)) {
    steps_per_epoch_ = (train_.size() + config_.batch_size - 1) / config_.batch_size;
    total_steps_ = steps_per_epoch_ * static_cast<std::size_t>(config_.max_epochs);
  }

  // Per-example loss routing; the teacher loop only uses the originals hook.
  struct Routing {
    std::function<LossTerms(const FeatureExample&, const Logits&, std::vector<double>&)> original;
    // Appends augmented contributions for the batch and returns their time.
    std::function<void(int epoch, std::span<const std::size_t> batch, StepLog& log,
                       EpochRecord& record)>
        augment;
    std::function<void(int epoch, EpochRecord& record)> begin_epoch;
  };

  TrainResult run(const Routing& routing) {
    TrainResult result;
    result.model = model_;
    int since_best = 0;
    std::size_t global_step = 0;
    std::vector<std::size_t> order(train_.size());

    for (int epoch = 0; epoch < config_.max_epochs; ++epoch) {
      const auto epoch_start = Clock::now();
      EpochRecord record;
      record.epoch = epoch;
      if (routing.begin_epoch) routing.begin_epoch(epoch, record);

      std::iota(order.begin(), order.end(), 0);
      Rng shuffle_rng(derive_seed(derive_seed(config_.seed, kShuffle),
                                  static_cast<std::uint64_t>(epoch)));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
      }

      double loss_sum = 0.0;
      std::size_t loss_terms = 0;
      for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        const std::span<const std::size_t> batch(order.data() + start, end - start);
        grads_.set_zero();
        StepLog log;
        log.epoch = epoch;
        log.step = global_step;

        for (std::size_t idx : batch) {
          const FeatureExample& ex = train_[idx];
          const ForwardTrace trace = model_.trace(ex.features);
          std::vector<double> logit_grad;
          const LossTerms terms = routing.original(ex, to_std(trace.logits()), logit_grad);
          backward(model_, trace, logit_grad, grads_);
          ++record.original_forward;
          ++record.original_backward;
          log.entries.push_back({ex.id, false, 0, terms});
        }
        if (routing.augment) routing.augment(epoch, batch, log, record);

        for (const auto& e : log.entries) {
          if (!std::isfinite(e.terms.total)) {
            throw Error(ErrorKind::kTrainingDivergence,
                        "non-finite loss at epoch " + std::to_string(epoch));
          }
          loss_sum += e.terms.total;
        }
        loss_terms += log.entries.size();
        grads_ *= 1.0 / static_cast<double>(log.entries.size());

        ++global_step;
        log.lr = lr_at(global_step, total_steps_, config_.warmup_fraction, config_.base_lr);
        optimizer_.step(model_, grads_, log.lr);
        if (hooks_.on_step) {
          log.model = &model_;
          hooks_.on_step(log);
        }
      }

      record.train_loss = loss_terms ? loss_sum / static_cast<double>(loss_terms) : 0.0;
      record.dev_accuracy = accuracy(model_, dev_.empty() ? train_ : dev_);
      record.forward_pass_count = record.original_forward + record.augmented_forward;
      record.backward_pass_count = record.original_backward + record.augmented_backward;
      record.wall_time = seconds_since(epoch_start);
      result.records.push_back(record);
      if (hooks_.on_epoch) hooks_.on_epoch(record);

      if (result.best_epoch < 0 || record.dev_accuracy > result.best_dev_accuracy) {
        result.best_epoch = epoch;
        result.best_dev_accuracy = record.dev_accuracy;
        result.model = model_;
        since_best = 0;
      } else if (++since_best >= config_.early_stop_patience) {
        break;
      }
    }
    return result;
  }

  const MLPClassifier& model() const { return model_; }
  Gradients& grads() { return grads_; }

 private:
  MLPClassifier model_;
  AdamOptimizer optimizer_;
  const FeatureSet& train_;
  const FeatureSet& dev_;
  const DistillConfig& config_;
  const TrainHooks& hooks_;
  Gradients grads_;
  std::size_t steps_per_epoch_ = 0;
  std::size_t total_steps_ = 0;
};

std::vector<std::size_t> model_dims(std::size_t input, const std::vector<std::size_t>& hidden,
                                    std::size_t classes) {
  std::vector<std::size_t> dims{input};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(classes);
  return dims;
}

void check_training_set(const FeatureSet& train, std::size_t num_classes) {
  if (train.empty()) throw Error(ErrorKind::kInvalidInput, "empty training set");
  const auto dim = train.front().features.size();
  for (const auto& ex : train) {
    if (ex.label >= num_classes) {
      throw Error(ErrorKind::kLabel, "label " + std::to_string(ex.label) + " of example " +
                                         std::to_string(ex.id) + " out of range");
    }
    if (ex.features.size() != dim) {
      throw Error(ErrorKind::kDimension, "training features differ in dimension");
    }
  }
}

}  // namespace

TrainResult train_teacher(const FeatureSet& train, const FeatureSet& dev, std::size_t num_classes,
                          const DistillConfig& config, const TrainHooks& hooks) {
  config.validate();
  check_training_set(train, num_classes);
  MLPClassifier model = MLPClassifier::create(
      model_dims(static_cast<std::size_t>(train.front().features.size()), config.teacher_hidden,
                 num_classes),
      derive_seed(config.seed, kTeacherInit));
  TrainingLoop loop(std::move(model), train, dev, config, hooks);

  TrainingLoop::Routing routing;
  routing.original = [](const FeatureExample& ex, const Logits& logits,
                        std::vector<double>& grad) {
    LossTerms t;
    t.ce = cross_entropy(ex.label, softmax_with_temperature(logits, 1.0));
    t.total = t.ce;
    grad = cross_entropy_grad(ex.label, logits);
    return t;
  };
  return loop.run(routing);
}

TrainResult distill(const MLPClassifier& teacher, const FeatureSet& train, const FeatureSet& dev,
                    const AugmentationPool& pool, const DistillConfig& config,
                    const TrainHooks& hooks) {
  config.validate();
  const std::size_t classes = teacher.num_classes();
  check_training_set(train, classes);
  const bool augmenting = uses_augmentation(config.mode);
  if (augmenting) {
    for (const auto& ex : train) pool.at(ex.id);  // coverage check up front
  }

  // Teacher outputs on the originals never change.
  std::vector<Logits> teacher_logits;
  if (config.mode != Mode::kNoAug) {
    teacher_logits.reserve(train.size());
    for (const auto& ex : train) teacher_logits.push_back(teacher.forward(ex.features));
  }
  std::map<std::size_t, std::size_t> position;
  for (std::size_t i = 0; i < train.size(); ++i) position.emplace(train[i].id, i);

  MLPClassifier student = MLPClassifier::create(
      model_dims(static_cast<std::size_t>(train.front().features.size()), config.student_hidden,
                 classes),
      derive_seed(config.seed, kStudentInit));
  TrainingLoop loop(std::move(student), train, dev, config, hooks);
  const KDHyperparams hp = config.kd();

  TrainingLoop::Routing routing;
  if (config.mode == Mode::kNoAug) {
    routing.original = [](const FeatureExample& ex, const Logits& logits,
                          std::vector<double>& grad) {
      LossTerms t;
      t.ce = cross_entropy(ex.label, softmax_with_temperature(logits, 1.0));
      t.total = t.ce;
      grad = cross_entropy_grad(ex.label, logits);
      return t;
    };
  } else {
    routing.original = [&](const FeatureExample& ex, const Logits& logits,
                           std::vector<double>& grad) {
      const Logits& zt = teacher_logits[position.at(ex.id)];
      grad = combined_loss_grad(ex.label, logits, zt, hp);
      return original_example_terms(ex.label, logits, zt, hp);
    };
  }

  // Per-epoch minimax selections, keyed by example id.
  std::map<std::size_t, SelectionResult> epoch_selection;
  const bool minimax = config.mode == Mode::kMinimaxKnn;
  RoundOptions round;
  round.n = config.n;
  round.epsilon = config.epsilon;
  round.score_temperature = config.score_temperature;
  round.threads = config.threads;

  auto emit_traces = [&](const std::vector<SelectionResult>& selections) {
    if (!hooks.traces) return;
    for (const auto& s : selections) hooks.traces->write(make_trace(s, pool.at(s.example_id)));
  };

  if (augmenting) {
    routing.begin_epoch = [&](int epoch, EpochRecord& record) {
      epoch_selection.clear();
      if (!minimax || config.reselect_every_step || epoch < config.aug_start_epoch) return;
      const auto start = Clock::now();
      std::vector<std::size_t> ids;
      ids.reserve(train.size());
      for (const auto& ex : train) ids.push_back(ex.id);
      round.epoch = epoch;
      round.keep_traces = false;
      RoundResult r = minimax_round(ids, pool, loop.model(), round);
      record.augmented_forward += r.forward_passes;
      record.scored_examples += ids.size();
      emit_traces(r.selections);
      for (auto& s : r.selections) epoch_selection.emplace(s.example_id, std::move(s));
      record.augmented_wall_time += seconds_since(start);
    };

    routing.augment = [&](int epoch, std::span<const std::size_t> batch, StepLog& log,
                          EpochRecord& record) {
      if (epoch < config.aug_start_epoch) return;
      const auto start = Clock::now();
      const MLPClassifier& model = loop.model();
      Gradients& grads = loop.grads();

      std::map<std::size_t, SelectionResult> step_selection;
      if (minimax && config.reselect_every_step) {
        std::vector<std::size_t> ids;
        for (std::size_t idx : batch) ids.push_back(train[idx].id);
        round.epoch = epoch;
        round.keep_traces = true;
        RoundResult r = minimax_round(ids, pool, model, round);
        record.augmented_forward += r.forward_passes;
        record.scored_examples += ids.size();
        emit_traces(r.selections);
        for (auto& s : r.selections) step_selection.emplace(s.example_id, std::move(s));
      }

      auto train_on = [&](const PoolCandidate& c, std::size_t example_id,
                          const ForwardTrace* cached) {
        ForwardTrace fresh;
        if (!cached) {
          fresh = model.trace(c.features);
          ++record.augmented_forward;
          cached = &fresh;
        }
        const Logits zs = to_std(cached->logits());
        backward(model, *cached, kd_loss_grad(zs, c.teacher_logits, hp.temperature), grads);
        ++record.augmented_backward;
        log.entries.push_back(
            {example_id, true, c.repo_id, augmented_example_terms(zs, c.teacher_logits,
                                                                  hp.temperature)});
      };

      for (std::size_t idx : batch) {
        const std::size_t id = train[idx].id;
        const PoolEntry& entry = pool.at(id);
        if (!minimax) {
          for (const auto& c : entry.candidates) {
            if (passes_epsilon(c.teacher_distance, config.epsilon)) train_on(c, id, nullptr);
          }
          continue;
        }
        const SelectionResult& sel =
            config.reselect_every_step ? step_selection.at(id) : epoch_selection.at(id);
        // Accumulate in pool order.
        std::vector<std::size_t> order(sel.selected.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return sel.selected[a] < sel.selected[b]; });
        for (std::size_t o : order) {
          const ForwardTrace* cached =
              sel.selected_traces.empty() ? nullptr : &sel.selected_traces[o];
          train_on(entry.candidates[sel.selected[o]], id, cached);
        }
      }
      record.augmented_wall_time += seconds_since(start);
    };
  }
  return loop.run(routing);
}

PoolOptions pool_options(const DistillConfig& config, bool random) {
  PoolOptions o;
  o.k = config.k;
  o.retrieval_depth = config.effective_retrieval_depth();
  o.rerank_by_teacher = config.rerank_by_teacher;
  o.random = random;
  o.seed = derive_seed(config.seed, kRandomPool);
  o.threads = config.threads;
  return o;
}

AugmentationPool build_pool(const FeatureSet& train, const EmbeddingMatrix& train_queries,
                            const AugmentationSource& source, const MLPClassifier& teacher,
                            const PoolOptions& options) {
  if (!source.index || !source.sentences || !source.features) {
    throw Error(ErrorKind::kIncompleteInput, "augmentation source is incomplete");
  }
  const FlatIndex& index = *source.index;
  if (source.sentences->size() != index.size() || source.features->rows() != index.size()) {
    throw Error(ErrorKind::kAlignment, "repository sentences, features and index differ in size");
  }
  if (train_queries.rows() != train.size()) {
    throw Error(ErrorKind::kAlignment, "one retrieval query per training example required");
  }
  if (options.k == 0) throw Error(ErrorKind::kConfig, "k must be at least 1");

  const std::size_t fetch =
      options.rerank_by_teacher ? std::max(options.k, options.retrieval_depth) : options.k;
  std::vector<PoolEntry> entries(train.size());

  auto build_one = [&](std::size_t i) {
    const FeatureExample& ex = train[i];
    const auto query = train_queries.row(i);
    NeighborSet neighbors =
        options.random
            ? random_candidates(index, std::min(fetch, index.size()),
                                derive_seed(options.seed, ex.id), ex.id, query)
            : index.knn_query(query, fetch, ex.id);

    const std::vector<double> query_repr = teacher.penultimate_repr(ex.features);
    std::vector<std::vector<double>> reprs;
    reprs.reserve(neighbors.candidates.size());
    for (const auto& c : neighbors.candidates) {
      reprs.push_back(teacher.penultimate_repr(to_vector(source.features->row(c.repo_id))));
    }
    if (options.rerank_by_teacher) {
      // Keep the representation attached to its candidate through the sort.
      std::map<std::size_t, std::vector<double>> by_id;
      for (std::size_t j = 0; j < reprs.size(); ++j) {
        by_id.emplace(neighbors.candidates[j].repo_id, reprs[j]);
      }
      const RankSource original_source = neighbors.candidates.empty()
                                             ? RankSource::kEncoder
                                             : neighbors.candidates.front().source;
      neighbors = rerank_by_teacher(std::move(neighbors), query_repr, reprs);
      if (neighbors.candidates.size() > options.k) neighbors.candidates.resize(options.k);
      reprs.clear();
      for (const auto& c : neighbors.candidates) reprs.push_back(by_id.at(c.repo_id));
      (void)original_source;
    } else {
      neighbors = with_teacher_distances(std::move(neighbors), query_repr, reprs);
    }

    PoolEntry entry;
    entry.example_id = ex.id;
    for (std::size_t j = 0; j < neighbors.candidates.size(); ++j) {
      const Candidate& c = neighbors.candidates[j];
      PoolCandidate pc;
      pc.repo_id = c.repo_id;
      pc.text = (*source.sentences)[c.repo_id];
      pc.features = to_vector(source.features->row(c.repo_id));
      pc.teacher_logits = teacher.forward(pc.features);
      pc.teacher_repr = std::move(reprs[j]);
      pc.teacher_distance = c.teacher_distance;
      pc.encoder_rank = c.encoder_rank;
      pc.teacher_rank = options.rerank_by_teacher ? j + 1 : 0;
      entry.candidates.push_back(std::move(pc));
    }
    entries[i] = std::move(entry);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, train.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < train.size(); ++i) build_one(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < train.size(); i += workers) build_one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  AugmentationPool pool;
  for (auto& e : entries) pool.insert(std::move(e));
  return pool;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> few_shot_subsample(
    const std::vector<LabeledExample>& train, const std::vector<LabeledExample>& dev,
    std::size_t num_classes, std::size_t per_label, std::size_t dev_cap, std::uint64_t seed) {
  if (per_label * num_classes > train.size()) {
    throw Error(ErrorKind::kSampling, std::to_string(per_label) + " per label x " +
                                          std::to_string(num_classes) +
                                          " classes exceeds the training set size");
  }
  std::vector<std::vector<std::size_t>> by_label(num_classes);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label >= num_classes) throw Error(ErrorKind::kLabel, "label out of range");
    by_label[train[i].label].push_back(i);
  }
  Rng rng(derive_seed(seed, kFewShot));
  std::vector<LabeledExample> small_train;
  small_train.reserve(per_label * num_classes);
  for (std::size_t label = 0; label < num_classes; ++label) {
    if (by_label[label].empty()) {
      throw Error(ErrorKind::kSampling, "class " + std::to_string(label) +
                                            " has no training examples");
    }
    for (std::size_t j = 0; j < per_label; ++j) {
      const auto& pick = train[by_label[label][uniform_index(rng, by_label[label].size())]];
      small_train.push_back({small_train.size(), pick.text, pick.label});
    }
  }

  if (dev.size() <= dev_cap) return {std::move(small_train), dev};

  // Largest-remainder apportionment of dev_cap over the dev label counts.
  std::vector<std::vector<std::size_t>> dev_by_label(num_classes);
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (dev[i].label >= num_classes) throw Error(ErrorKind::kLabel, "label out of range");
    dev_by_label[dev[i].label].push_back(i);
  }
  std::vector<std::size_t> quota(num_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t label = 0; label < num_classes; ++label) {
    const double exact = static_cast<double>(dev_cap) *
                         static_cast<double>(dev_by_label[label].size()) /
                         static_cast<double>(dev.size());
    quota[label] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[label];
    remainders.emplace_back(exact - std::floor(exact), label);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < dev_cap && i < remainders.size(); ++i, ++assigned) {
    ++quota[remainders[i].second];
  }

  std::vector<std::size_t> keep;
  for (std::size_t label = 0; label < num_classes; ++label) {
    auto& pool = dev_by_label[label];
    for (std::size_t j = 0; j < quota[label] && j < pool.size(); ++j) {
      const std::size_t pick = j + uniform_index(rng, pool.size() - j);
      std::swap(pool[j], pool[pick]);
      keep.push_back(pool[j]);
    }
  }
  std::sort(keep.begin(), keep.end());
  std::vector<LabeledExample> small_dev;
  small_dev.reserve(keep.size());
  for (std::size_t i : keep) small_dev.push_back(dev[i]);
  return {std::move(small_train), std::move(small_dev)};
}

ExperimentData prepare_experiment(const Dataset& dataset, const SentenceRepository* repo,
                                  const HashedNgramEmbedder& embedder) {
  dataset.validate();
  ExperimentData data;
  data.num_classes = dataset.num_classes();
  data.train = featurize(dataset.train, embedder);
  data.dev = featurize(dataset.dev, embedder);
  data.test = featurize(dataset.test, embedder);
  for (const auto& ex : dataset.train) data.train_texts.push_back(ex.text);
  if (repo) {
    if (repo->embeddings.dim() != embedder.dim()) {
      throw Error(ErrorKind::kDimension,
                  "repository embeddings have dimension " + std::to_string(repo->embeddings.dim()) +
                      " but the query embedder produces " + std::to_string(embedder.dim()));
    }
    data.index = FlatIndex::build(*repo);
    data.repo_sentences = repo->sentences;
    data.repo_features = embedder.embed_all(repo->sentences);
    data.train_queries = embedder.embed_all(data.train_texts);
  }
  return data;
}

std::vector<AblationRow> ablation_grid(const DistillConfig& base) {
  std::vector<AblationRow> rows;
  auto add = [&](std::string name, Mode mode, bool random, bool rerank, bool eps) {
    AblationRow row;
    row.row = static_cast<int>(rows.size()) + 1;
    row.name = std::move(name);
    row.config = base;
    row.config.mode = mode;
    row.config.rerank_by_teacher = rerank;
    row.config.epsilon = eps ? base.epsilon : kNoEpsilon;
    row.random_pool = random;
    rows.push_back(std::move(row));
  };
  add("student", Mode::kNoAug, false, false, false);
  add("+KD", Mode::kKdOnly, false, false, false);
  add("+KD+random", Mode::kRandomAug, true, false, false);
  add("+KD+random+reranked", Mode::kRandomAug, true, true, false);
  add("+KD+random+reranked+eps", Mode::kRandomAug, true, true, true);
  add("+KD+kNN", Mode::kVanillaKnn, false, false, false);
  add("+KD+kNN+reranked(vanilla)", Mode::kVanillaKnn, false, true, false);
  add("+vanilla-kNN+eps", Mode::kVanillaKnn, false, true, true);
  add("+minimax-kNN+eps", Mode::kMinimaxKnn, false, true, true);
  return rows;
}

std::vector<AblationRow> run_ablation(const ExperimentData& data, const MLPClassifier& teacher,
                                      std::vector<AblationRow> rows) {
  // Pools depend only on (random, rerank); rows with the same key share one.
  std::map<std::pair<bool, bool>, AugmentationPool> pools;
  for (auto& row : rows) {
    AugmentationPool empty;
    const AugmentationPool* pool = &empty;
    if (uses_augmentation(row.config.mode)) {
      if (!data.index) throw Error(ErrorKind::kIncompleteInput, "ablation needs a repository");
      const auto key = std::make_pair(row.random_pool, row.config.rerank_by_teacher);
      auto it = pools.find(key);
      if (it == pools.end()) {
        it = pools
                 .emplace(key, build_pool(data.train, data.train_queries, data.source(), teacher,
                                          pool_options(row.config, row.random_pool)))
                 .first;
      }
      pool = &it->second;
    }
    const TrainResult result = distill(teacher, data.train, data.dev, *pool, row.config);
    row.dev_accuracy = result.best_dev_accuracy;
    row.test_accuracy = accuracy(result.model, data.test);
    row.best_epoch = result.best_epoch;
    row.augmented_forward = 0;
    row.augmented_backward = 0;
    for (const auto& r : result.records) {
      row.augmented_forward += r.augmented_forward;
      row.augmented_backward += r.augmented_backward;
    }
  }
  return rows;
}

std::string to_json_line(const AblationRow& row) {
  nlohmann::json j;
  j["row"] = row.row;
  j["name"] = row.name;
  j["mode"] = std::string(to_string(row.config.mode));
  j["random_pool"] = row.random_pool;
  j["reranked"] = row.config.rerank_by_teacher;
  j["epsilon"] = format_double(row.config.epsilon);
  j["k"] = row.config.k;
  j["n"] = row.config.n;
  j["dev_accuracy"] = row.dev_accuracy;
  j["test_accuracy"] = row.test_accuracy;
  j["augmented_forward"] = row.augmented_forward;
  j["augmented_backward"] = row.augmented_backward;
  j["best_epoch"] = row.best_epoch;
  return j.dump();
}

}  // namespace mmknn
