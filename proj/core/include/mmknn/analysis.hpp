// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mmknn/minimax_selector.hpp"
#include "mmknn/models.hpp"
#include "mmknn/trainer.hpp"

namespace mmknn {

inline constexpr std::size_t kDefaultBuckets = 50;
inline constexpr double kDefaultOverlapThreshold = 0.05;

/// Teacher-space distances of augmentation candidates split by whether the
/// teacher predicts the same label on the candidate as on its original.
struct DistanceHistogram {
  /// buckets + 1 ascending edges from 0 to 1.
  std::vector<double> edges;
  std::vector<std::size_t> matched;
  std::vector<std::size_t> mismatched;
  /// Largest matched distance seen, if any candidate matched.
  std::optional<double> max_matched_distance;

  std::size_t buckets() const noexcept { return matched.size(); }
  std::size_t total() const;
  std::size_t bucket_of(double distance) const;
};

/// Equal-width histogram over [0, 1]; the last bucket is closed.
DistanceHistogram make_histogram(std::span<const double> matched,
                                 std::span<const double> mismatched,
                                 std::size_t buckets = kDefaultBuckets);

/// Buckets every pool candidate by its cached teacher distance. Throws
/// kEmptyReport on an empty pool and kIncompleteInput on a candidate without
/// a distance.
DistanceHistogram distance_distribution(const FeatureSet& train, const AugmentationPool& pool,
                                        const MLPClassifier& teacher,
                                        std::size_t buckets = kDefaultBuckets);

/// Fraction of mismatched candidates falling in buckets up to the one holding
/// the matched maximum (0 without mismatched candidates).
double mismatched_overlap(const DistanceHistogram& hist);

/// The matched maximum when the overlap is below `overlap_threshold`,
/// otherwise infinity (no filtering). Infinity as well when nothing matched.
double suggest_epsilon(const DistanceHistogram& hist,
                       double overlap_threshold = kDefaultOverlapThreshold);

/// Two columns "midpoint count" for one group, with a header line.
void write_histogram_table(std::ostream& out, const DistanceHistogram& hist, bool matched);

struct ReportRow {
  int epoch = 0;
  std::size_t example_id = 0;
  std::string example_text;
  std::size_t repo_id = 0;
  std::string candidate_text;
  std::size_t encoder_rank = 0;
  std::size_t teacher_rank = 0;
  std::size_t teacher_label = 0;
  std::size_t original_teacher_label = 0;
  std::optional<double> teacher_distance;
  double kl_score = 0.0;
  bool passing = true;
  bool selected = false;
  bool label_mismatch = false;
};

/// One row per candidate of every traced selection. `texts` maps example ids
/// to original texts and may be empty. Throws kAlignment when a trace does
/// not match its pool entry.
std::vector<ReportRow> augmentation_report(const FeatureSet& train, const AugmentationPool& pool,
                                           const MLPClassifier& teacher,
                                           std::span<const SelectionTrace> traces,
                                           const std::map<std::size_t, std::string>& texts = {});

/// Tab-separated table with a header line; label indices are printed through
/// `label_names` when given.
void write_report(std::ostream& out, std::span<const ReportRow> rows,
                  const std::vector<std::string>& label_names = {});

}  // namespace mmknn
