// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmknn/distill_core.hpp"
#include "mmknn/models.hpp"

namespace mmknn {

/// One retrieved augmentation candidate with its cached teacher outputs.
struct PoolCandidate {
  std::size_t repo_id = 0;
  std::string text;
  Vector features;
  Logits teacher_logits;
  std::vector<double> teacher_repr;
  std::optional<double> teacher_distance;
  /// 1-based ranks; 0 when the candidate did not come from that ranking.
  std::size_t encoder_rank = 0;
  std::size_t teacher_rank = 0;
};

struct PoolEntry {
  std::size_t example_id = 0;
  std::vector<PoolCandidate> candidates;
};

/// Candidate lists keyed by original example id.
class AugmentationPool {
 public:
  void insert(PoolEntry entry);
  /// Throws kCoverage when the example has no entry.
  const PoolEntry& at(std::size_t example_id) const;
  bool contains(std::size_t example_id) const { return entries_.count(example_id) != 0; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t total_candidates() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::size_t, PoolEntry> entries_;
};

/// Outcome of the maximization step for one original example.
struct SelectionResult {
  std::size_t example_id = 0;
  int epoch = 0;
  /// Indices into the pool entry, ordered by score descending then repo id.
  std::vector<std::size_t> selected;
  /// KL score of every candidate in pool order.
  std::vector<double> kl_scores;
  /// Epsilon mask in pool order.
  std::vector<bool> passing;
  /// Forward traces of the selected candidates (aligned with `selected`),
  /// only populated when requested.
  std::vector<ForwardTrace> selected_traces;
};

/// KL(softmax(z_t / tau) || softmax(z_s / tau)) for every candidate, where
/// z_s comes from a forward pass of the student on the candidate features.
/// No temperature-squared factor: the score only ranks candidates.
std::vector<double> score_candidates(const PoolEntry& entry, const MLPClassifier& student,
                                     double score_temperature = 1.0);

/// The min(n, #passing) passing indices with the highest scores, sorted by
/// score descending then repo id ascending.
std::vector<std::size_t> select_top_n(std::span<const double> scores,
                                      std::span<const std::size_t> repo_ids, std::size_t n,
                                      const std::vector<bool>& passing);

struct RoundOptions {
  std::size_t n = 4;
  double epsilon = std::numeric_limits<double>::infinity();
  double score_temperature = 1.0;
  int epoch = 0;
  std::size_t threads = 1;
  bool keep_traces = false;
};

struct RoundResult {
  std::vector<SelectionResult> selections;
  /// Student forward passes spent on scoring (one per candidate).
  std::size_t forward_passes = 0;
};

/// Score -> epsilon filter -> top-n for every example in `batch`, against a
/// frozen student. Selections come back in batch order regardless of threads.
RoundResult minimax_round(std::span<const std::size_t> batch, const AugmentationPool& pool,
                          const MLPClassifier& student, const RoundOptions& options);

/// Line-delimited JSON trace record of one selection.
struct SelectionTrace {
  int epoch = 0;
  std::size_t example_id = 0;
  std::vector<std::size_t> repo_ids;
  std::vector<double> scores;
  std::vector<bool> passing;
  std::vector<std::size_t> selected_repo_ids;
};

SelectionTrace make_trace(const SelectionResult& result, const PoolEntry& entry);

class SelectionTraceWriter {
 public:
  explicit SelectionTraceWriter(const std::filesystem::path& path);
  void write(const SelectionTrace& trace);

 private:
  std::ofstream out_;
};

std::string to_json_line(const SelectionTrace& trace);
SelectionTrace trace_from_json_line(const std::string& line);
std::vector<SelectionTrace> read_selection_traces(const std::filesystem::path& path);

}  // namespace mmknn
