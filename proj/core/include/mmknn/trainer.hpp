// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmknn/data_io.hpp"
#include "mmknn/distill_core.hpp"
#include "mmknn/embedding_index.hpp"
#include "mmknn/minimax_selector.hpp"
#include "mmknn/models.hpp"

namespace mmknn {

/// How the student is trained.
///   kNoAug      - gold labels only, no teacher (plain student baseline)
///   kKdOnly     - distillation loss on original data
///   kVanillaKnn - plus every retrieved neighbour passing the epsilon radius
///   kMinimaxKnn - plus the n neighbours of highest teacher-student KL
///   kRandomAug  - like kVanillaKnn, over a pool of random repository rows
enum class Mode { kNoAug, kKdOnly, kVanillaKnn, kMinimaxKnn, kRandomAug };

std::string_view to_string(Mode mode);
/// Accepts the enum spellings and the short CLI forms (vanilla, minimax, random).
Mode parse_mode(std::string_view text);
bool uses_augmentation(Mode mode);

struct DistillConfig {
  double lambda = 0.5;
  double temperature = 10.0;
  std::size_t k = 8;
  std::size_t n = 4;
  double epsilon = kNoEpsilon;
  int aug_start_epoch = 0;
  int max_epochs = 100;
  int early_stop_patience = 10;
  double base_lr = 5e-3;
  double warmup_fraction = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  Mode mode = Mode::kMinimaxKnn;
  bool rerank_by_teacher = true;
  double score_temperature = 1.0;
  /// Re-run selection before every optimizer step instead of once per epoch.
  bool reselect_every_step = false;
  /// Neighbours retrieved before teacher reranking truncates to k; 0 means 2k.
  std::size_t retrieval_depth = 0;
  std::size_t threads = 1;
  std::vector<std::size_t> teacher_hidden = {64, 64};
  std::vector<std::size_t> student_hidden = {8};

  /// Throws kConfig on any violated invariant (n <= k, lambda in [0,1], ...).
  void validate() const;
  std::size_t effective_retrieval_depth() const { return retrieval_depth ? retrieval_depth : 2 * k; }
  KDHyperparams kd() const { return {lambda, temperature}; }
  /// The minimax re-forward variant is in effect whenever selection happens
  /// on a snapshot older than the step that back-propagates.
  bool reforward_selected() const { return !reselect_every_step; }
};

/// key=value lines for every field; `parse_manifest` accepts the same keys.
void write_manifest(std::ostream& out, const DistillConfig& config);
void apply_setting(DistillConfig& config, std::string_view key, std::string_view value);

/// Linear warm-up from 0 to base_lr over round(warmup_fraction * total_steps)
/// steps (at least one), then linear decay to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, double warmup_fraction, double base_lr);

/// Model input: feature vector and gold label of one example.
struct FeatureExample {
  std::size_t id = 0;
  Vector features;
  std::size_t label = 0;
};
using FeatureSet = std::vector<FeatureExample>;

FeatureSet featurize(const std::vector<LabeledExample>& examples, const HashedNgramEmbedder& embedder);
double accuracy(const MLPClassifier& model, const FeatureSet& data);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  std::size_t forward_pass_count = 0;
  std::size_t backward_pass_count = 0;
  std::size_t original_forward = 0;
  std::size_t original_backward = 0;
  std::size_t augmented_forward = 0;
  std::size_t augmented_backward = 0;
  /// Examples whose candidates were scored (one sort each).
  std::size_t scored_examples = 0;
  double wall_time = 0.0;
  double augmented_wall_time = 0.0;
};

std::string to_json_line(const EpochRecord& record);
EpochRecord epoch_record_from_json_line(const std::string& line);
/// Reads the per-epoch records of a metrics file, skipping the summary line.
std::vector<EpochRecord> read_metrics(const std::filesystem::path& path);

/// One loss contribution inside an optimizer step.
struct LossLogEntry {
  std::size_t example_id = 0;
  bool augmented = false;
  std::size_t repo_id = 0;
  LossTerms terms;
};

struct StepLog {
  int epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  std::vector<LossLogEntry> entries;
  /// Parameters after the update.
  const MLPClassifier* model = nullptr;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  SelectionTraceWriter* traces = nullptr;
};

struct TrainResult {
  MLPClassifier model;
  std::vector<EpochRecord> records;
  int best_epoch = -1;
  double best_dev_accuracy = 0.0;
};

/// Cross-entropy training of the teacher; returns the best-dev checkpoint.
/// An empty dev set falls back to train accuracy for model selection.
TrainResult train_teacher(const FeatureSet& train, const FeatureSet& dev, std::size_t num_classes,
                          const DistillConfig& config, const TrainHooks& hooks = {});

/// Distills a student from a frozen teacher. Originals contribute the mixed
/// loss, augmented neighbours the distillation term only; augmentation starts
/// at config.aug_start_epoch. Early stopping on dev accuracy.
TrainResult distill(const MLPClassifier& teacher, const FeatureSet& train, const FeatureSet& dev,
                    const AugmentationPool& pool, const DistillConfig& config,
                    const TrainHooks& hooks = {});

/// Where augmentation candidates come from: the search index, the repository
/// text and the model features of every repository row.
struct AugmentationSource {
  const FlatIndex* index = nullptr;
  const std::vector<std::string>* sentences = nullptr;
  const EmbeddingMatrix* features = nullptr;
};

struct PoolOptions {
  std::size_t k = 8;
  std::size_t retrieval_depth = 16;
  bool rerank_by_teacher = true;
  bool random = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// Retrieves (or samples) candidates for every training example, caches the
/// teacher's logits and representations, and records teacher-space angular
/// distances. With reranking, `retrieval_depth` candidates are reordered by
/// the teacher and the closest k kept; otherwise the encoder's top k.
AugmentationPool build_pool(const FeatureSet& train, const EmbeddingMatrix& train_queries,
                            const AugmentationSource& source, const MLPClassifier& teacher,
                            const PoolOptions& options);

PoolOptions pool_options(const DistillConfig& config, bool random);

/// Balanced with-replacement sample of `per_label` training examples per class
/// (ids reassigned 0..), and a dev set cut to `dev_cap` keeping label
/// proportions (largest remainder). Dev sets at or below the cap are kept.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> few_shot_subsample(
    const std::vector<LabeledExample>& train, const std::vector<LabeledExample>& dev,
    std::size_t num_classes, std::size_t per_label, std::size_t dev_cap, std::uint64_t seed);

/// Everything a run needs, featurized once.
struct ExperimentData {
  FeatureSet train;
  FeatureSet dev;
  FeatureSet test;
  std::vector<std::string> train_texts;
  EmbeddingMatrix train_queries;
  std::vector<std::string> repo_sentences;
  EmbeddingMatrix repo_features;
  std::optional<FlatIndex> index;
  std::size_t num_classes = 0;

  AugmentationSource source() const { return {&*index, &repo_sentences, &repo_features}; }
};

/// Featurizes the dataset with `embedder`. When `repo` is given it is indexed
/// for retrieval and its sentences are featurized for the models. Training
/// queries use the same embedder, and an ingested repository must match its
/// dimension (kDimension otherwise).
ExperimentData prepare_experiment(const Dataset& dataset, const SentenceRepository* repo,
                                  const HashedNgramEmbedder& embedder);

struct AblationRow {
  int row = 0;
  std::string name;
  DistillConfig config;
  bool random_pool = false;
  double dev_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t augmented_forward = 0;
  std::size_t augmented_backward = 0;
  int best_epoch = -1;
};

/// The nine ablation rows: student, +KD, random (+rerank, +eps), kNN
/// (+rerank = vanilla, +eps), MiniMax + eps. All rows share `base`'s seed,
/// hyperparameters and data; kNN-based rows share one candidate pool.
std::vector<AblationRow> ablation_grid(const DistillConfig& base);
std::vector<AblationRow> run_ablation(const ExperimentData& data, const MLPClassifier& teacher,
                                      std::vector<AblationRow> rows);
std::string to_json_line(const AblationRow& row);

}  // namespace mmknn
