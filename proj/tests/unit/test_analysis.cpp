// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "expect_error.hpp"
#include "mmknn/analysis.hpp"

using namespace mmknn;

namespace {

MLPClassifier identity_teacher() {
  auto m = MLPClassifier::zeros({2, 2});
  m.weight(0) = Matrix::Identity(2, 2);
  return m;
}

FeatureExample original(std::size_t id, double a, double b) {
  FeatureExample ex;
  ex.id = id;
  ex.features = Vector(2);
  ex.features << a, b;
  return ex;
}

PoolCandidate cand(std::size_t repo_id, std::size_t label, std::optional<double> distance) {
  PoolCandidate c;
  c.repo_id = repo_id;
  c.text = "cand" + std::to_string(repo_id);
  c.features = Vector::Zero(2);
  c.teacher_logits = label == 0 ? Logits{1.0, 0.0} : Logits{0.0, 1.0};
  c.teacher_distance = distance;
  return c;
}

}  // namespace

TEST(Histogram, BucketsAndClosedUpperEdge) {
  const std::vector<double> m{0.0, 0.1, 0.2, 1.0}, mm{0.55};
  const auto h = make_histogram(m, mm, 10);
  EXPECT_EQ(h.buckets(), 10u);
  EXPECT_EQ(h.edges.size(), 11u);
  EXPECT_EQ(h.total(), 5u);
  EXPECT_EQ(h.bucket_of(1.0), 9u);
  EXPECT_EQ(h.bucket_of(0.0), 0u);
  EXPECT_EQ(h.matched[9], 1u);
  EXPECT_EQ(h.mismatched[5], 1u);
  EXPECT_DOUBLE_EQ(*h.max_matched_distance, 1.0);
  expect_kind(ErrorKind::kInvalidInput, [&] { h.bucket_of(1.5); });
}

TEST(Overlap, SeparatedGroupsSuggestMatchedMaximum) {
  const std::vector<double> m{0.05, 0.12, 0.21}, mm{0.4, 0.6, 0.9};
  const auto h = make_histogram(m, mm, 50);
  EXPECT_DOUBLE_EQ(mismatched_overlap(h), 0.0);
  EXPECT_DOUBLE_EQ(suggest_epsilon(h), 0.21);
}

TEST(Overlap, InterleavedGroupsDisableFiltering) {
  const std::vector<double> m{0.1, 0.5}, mm{0.2, 0.3, 0.9};
  const auto h = make_histogram(m, mm, 50);
  EXPECT_NEAR(mismatched_overlap(h), 2.0 / 3.0, 1e-12);
  EXPECT_TRUE(std::isinf(suggest_epsilon(h)));
}

TEST(Overlap, EdgeCases) {
  const auto no_mismatch = make_histogram(std::vector<double>{0.3}, {}, 10);
  EXPECT_DOUBLE_EQ(mismatched_overlap(no_mismatch), 0.0);
  EXPECT_DOUBLE_EQ(suggest_epsilon(no_mismatch), 0.3);
  const auto no_match = make_histogram({}, std::vector<double>{0.3}, 10);
  EXPECT_DOUBLE_EQ(mismatched_overlap(no_match), 1.0);
  EXPECT_TRUE(std::isinf(suggest_epsilon(no_match)));
}

TEST(Distribution, SplitsByTeacherLabel) {
  const FeatureSet train{original(0, 2.0, 0.0), original(1, 0.0, 2.0)};
  AugmentationPool pool;
  pool.insert({0, {cand(10, 0, 0.1), cand(11, 1, 0.7)}});
  pool.insert({1, {cand(12, 1, 0.2), cand(13, 0, 0.8), cand(14, 1, 0.15)}});
  const auto h = distance_distribution(train, pool, identity_teacher(), 10);
  std::size_t matched = 0, mismatched = 0;
  for (auto c : h.matched) matched += c;
  for (auto c : h.mismatched) mismatched += c;
  EXPECT_EQ(matched, 3u);
  EXPECT_EQ(mismatched, 2u);
  EXPECT_DOUBLE_EQ(*h.max_matched_distance, 0.2);
  EXPECT_DOUBLE_EQ(suggest_epsilon(h), 0.2);
}

TEST(Distribution, Errors) {
  const FeatureSet train{original(0, 1.0, 0.0)};
  AugmentationPool empty;
  expect_kind(ErrorKind::kEmptyReport,
              [&] { distance_distribution(train, empty, identity_teacher()); });
  AugmentationPool missing;
  missing.insert({0, {cand(1, 0, std::nullopt)}});
  expect_kind(ErrorKind::kIncompleteInput,
              [&] { distance_distribution(train, missing, identity_teacher()); });
}

TEST(Report, RowsFlagsAndTable) {
  const FeatureSet train{original(0, 2.0, 0.0)};
  AugmentationPool pool;
  pool.insert({0, {cand(10, 0, 0.1), cand(11, 1, 0.7)}});
  const std::vector<SelectionTrace> traces{{2, 0, {10, 11}, {0.3, 0.9}, {true, false}, {10}}};
  const auto rows = augmentation_report(train, pool, identity_teacher(), traces, {{0, "orig"}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].selected);
  EXPECT_FALSE(rows[0].label_mismatch);
  EXPECT_FALSE(rows[1].passing);
  EXPECT_TRUE(rows[1].label_mismatch);
  EXPECT_EQ(rows[1].example_text, "orig");
  std::ostringstream out;
  write_report(out, rows, {"neg", "pos"});
  const std::string s = out.str();
  EXPECT_NE(s.find("MISMATCH"), std::string::npos);
  EXPECT_NE(s.find("cand11\t0\t0\tpos\tneg"), std::string::npos);
}

TEST(Report, MisalignedTrace) {
  const FeatureSet train{original(0, 2.0, 0.0)};
  AugmentationPool pool;
  pool.insert({0, {cand(10, 0, 0.1), cand(11, 1, 0.7)}});
  const std::vector<SelectionTrace> swapped{{0, 0, {11, 10}, {0.3, 0.9}, {true, true}, {}}};
  expect_kind(ErrorKind::kAlignment,
              [&] { augmentation_report(train, pool, identity_teacher(), swapped); });
  const std::vector<SelectionTrace> short_trace{{0, 0, {10}, {0.3}, {true}, {}}};
  expect_kind(ErrorKind::kAlignment,
              [&] { augmentation_report(train, pool, identity_teacher(), short_trace); });
}

TEST(HistogramTable, Midpoints) {
  const auto h = make_histogram(std::vector<double>{0.05}, {}, 2);
  std::ostringstream out;
  write_histogram_table(out, h, true);
  EXPECT_EQ(out.str(), "midpoint count\n0.25 1\n0.75 0\n");
}
