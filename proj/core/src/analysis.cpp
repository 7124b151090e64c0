// SPDX-License-Identifier: Apache-2.0
#include "mmknn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "mmknn/error.hpp"

namespace mmknn {

std::size_t DistanceHistogram::total() const {
  std::size_t sum = 0;
  for (std::size_t c : matched) sum += c;
  for (std::size_t c : mismatched) sum += c;
  return sum;
}

std::size_t DistanceHistogram::bucket_of(double distance) const {
  if (buckets() == 0) throw Error(ErrorKind::kEmptyReport, "histogram has no buckets");
  if (!(distance >= 0.0 && distance <= 1.0)) {
    throw Error(ErrorKind::kInvalidInput, "distance outside [0,1]");
  }
  const auto b = static_cast<std::size_t>(distance * static_cast<double>(buckets()));
  return std::min(b, buckets() - 1);
}

DistanceHistogram make_histogram(std::span<const double> matched,
                                 std::span<const double> mismatched, std::size_t buckets) {
  if (buckets == 0) throw Error(ErrorKind::kConfig, "at least one bucket required");
  DistanceHistogram h;
  h.edges.resize(buckets + 1);
  for (std::size_t i = 0; i <= buckets; ++i) {
    h.edges[i] = static_cast<double>(i) / static_cast<double>(buckets);
  }
  h.matched.assign(buckets, 0);
  h.mismatched.assign(buckets, 0);
  for (double d : matched) {
    ++h.matched[h.bucket_of(d)];
    h.max_matched_distance = std::max(h.max_matched_distance.value_or(d), d);
  }
  for (double d : mismatched) ++h.mismatched[h.bucket_of(d)];
  return h;
}

DistanceHistogram distance_distribution(const FeatureSet& train, const AugmentationPool& pool,
                                        const MLPClassifier& teacher, std::size_t buckets) {
  if (pool.empty() || pool.total_candidates() == 0) {
    throw Error(ErrorKind::kEmptyReport, "pool has no candidates");
  }
  std::vector<double> matched, mismatched;
  for (const auto& ex : train) {
    if (!pool.contains(ex.id)) continue;
    const std::size_t original = argmax(teacher.forward(ex.features));
    for (const auto& c : pool.at(ex.id).candidates) {
      if (!c.teacher_distance) {
        throw Error(ErrorKind::kIncompleteInput,
                    "candidate " + std::to_string(c.repo_id) + " has no teacher distance");
      }
      (argmax(c.teacher_logits) == original ? matched : mismatched).push_back(*c.teacher_distance);
    }
  }
  if (matched.empty() && mismatched.empty()) {
    throw Error(ErrorKind::kEmptyReport, "no pool entry belongs to the training set");
  }
  return make_histogram(matched, mismatched, buckets);
}

double mismatched_overlap(const DistanceHistogram& hist) {
  std::size_t total = 0;
  for (std::size_t c : hist.mismatched) total += c;
  if (total == 0) return 0.0;
  if (!hist.max_matched_distance) return 1.0;
  const std::size_t last = hist.bucket_of(*hist.max_matched_distance);
  std::size_t below = 0;
  for (std::size_t b = 0; b <= last; ++b) below += hist.mismatched[b];
  return static_cast<double>(below) / static_cast<double>(total);
}

double suggest_epsilon(const DistanceHistogram& hist, double overlap_threshold) {
  if (!hist.max_matched_distance) return std::numeric_limits<double>::infinity();
  if (mismatched_overlap(hist) < overlap_threshold) return *hist.max_matched_distance;
  return std::numeric_limits<double>::infinity();
}

void write_histogram_table(std::ostream& out, const DistanceHistogram& hist, bool matched) {
  const auto& counts = matched ? hist.matched : hist.mismatched;
  out << "midpoint count\n" << std::setprecision(6);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out << 0.5 * (hist.edges[b] + hist.edges[b + 1]) << ' ' << counts[b] << '\n';
  }
}

std::vector<ReportRow> augmentation_report(const FeatureSet& train, const AugmentationPool& pool,
                                           const MLPClassifier& teacher,
                                           std::span<const SelectionTrace> traces,
                                           const std::map<std::size_t, std::string>& texts) {
  std::map<std::size_t, const FeatureExample*> by_id;
  for (const auto& ex : train) by_id.emplace(ex.id, &ex);

  std::vector<ReportRow> rows;
  for (const auto& trace : traces) {
    const PoolEntry& entry = pool.at(trace.example_id);
    const auto it = by_id.find(trace.example_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kAlignment,
                  "trace for unknown example " + std::to_string(trace.example_id));
    }
    if (trace.repo_ids.size() != entry.candidates.size() ||
        trace.scores.size() != entry.candidates.size()) {
      throw Error(ErrorKind::kAlignment, "trace for example " + std::to_string(trace.example_id) +
                                             " does not match its pool entry");
    }
    const std::size_t original = argmax(teacher.forward(it->second->features));
    const auto text = texts.find(trace.example_id);
    for (std::size_t j = 0; j < entry.candidates.size(); ++j) {
      const PoolCandidate& c = entry.candidates[j];
      if (trace.repo_ids[j] != c.repo_id) {
        throw Error(ErrorKind::kAlignment, "trace candidate order differs from the pool");
      }
      ReportRow row;
      row.epoch = trace.epoch;
      row.example_id = trace.example_id;
      if (text != texts.end()) row.example_text = text->second;
      row.repo_id = c.repo_id;
      row.candidate_text = c.text;
      row.encoder_rank = c.encoder_rank;
      row.teacher_rank = c.teacher_rank;
      row.teacher_label = argmax(c.teacher_logits);
      row.original_teacher_label = original;
      row.teacher_distance = c.teacher_distance;
      row.kl_score = trace.scores[j];
      row.passing = j < trace.passing.size() ? static_cast<bool>(trace.passing[j]) : true;
      row.selected = std::find(trace.selected_repo_ids.begin(), trace.selected_repo_ids.end(),
                               c.repo_id) != trace.selected_repo_ids.end();
      row.label_mismatch = row.teacher_label != original;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string label_name(std::size_t label, const std::vector<std::string>& names) {
  return label < names.size() ? names[label] : std::to_string(label);
}

}  // namespace

void write_report(std::ostream& out, std::span<const ReportRow> rows,
                  const std::vector<std::string>& label_names) {
  out << "epoch\texample_id\texample_text\trepo_id\tcandidate_text\tencoder_rank\tteacher_rank"
         "\tteacher_label\toriginal_label\tdistance\tkl\tpassing\tselected\tmismatch\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.epoch << '\t' << r.example_id << '\t' << r.example_text << '\t' << r.repo_id << '\t'
        << r.candidate_text << '\t' << r.encoder_rank << '\t' << r.teacher_rank << '\t'
        << label_name(r.teacher_label, label_names) << '\t'
        << label_name(r.original_teacher_label, label_names) << '\t';
    if (r.teacher_distance) {
      out << *r.teacher_distance;
    } else {
      out << '-';
    }
    out << '\t' << r.kl_score << '\t' << (r.passing ? 1 : 0) << '\t' << (r.selected ? 1 : 0)
        << '\t' << (r.label_mismatch ? "MISMATCH" : "") << '\n';
  }
}

}  // namespace mmknn
