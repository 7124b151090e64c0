// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "expect_error.hpp"
#include "fixtures.hpp"
#include "mmknn/trainer.hpp"

using namespace mmknn;

namespace {

const fixture::Experiment& shared() {
  static const fixture::Experiment e = fixture::make_experiment();
  return e;
}

DistillConfig small_config(Mode mode) {
  DistillConfig c;
  c.mode = mode;
  c.k = 4;
  c.n = 2;
  c.max_epochs = 3;
  c.batch_size = 16;
  c.seed = 5;
  return c;
}

TrainResult run(const DistillConfig& c, const AugmentationPool& pool, const TrainHooks& hooks = {}) {
  const auto& e = shared();
  return distill(e.teacher, e.data.train, e.data.dev, pool, c, hooks);
}

}  // namespace

TEST(Mode, ParseAndPrint) {
  EXPECT_EQ(parse_mode("minimax"), Mode::kMinimaxKnn);
  EXPECT_EQ(parse_mode("vanilla_knn"), Mode::kVanillaKnn);
  EXPECT_EQ(parse_mode("kd"), Mode::kKdOnly);
  EXPECT_EQ(parse_mode(to_string(Mode::kRandomAug)), Mode::kRandomAug);
  expect_kind(ErrorKind::kConfig, [] { parse_mode("bogus"); });
}

TEST(Config, Validation) {
  DistillConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n = 9;
  c.k = 8;
  expect_kind(ErrorKind::kConfig, [&] { c.validate(); });
  c = {};
  c.lambda = 1.5;
  expect_kind(ErrorKind::kConfig, [&] { c.validate(); });
  c = {};
  c.teacher_hidden.clear();
  expect_kind(ErrorKind::kConfig, [&] { c.validate(); });
}

TEST(Config, ManifestRoundTrip) {
  DistillConfig c;
  c.lambda = 0.25;
  c.k = 16;
  c.n = 3;
  c.epsilon = 0.3;
  c.mode = Mode::kVanillaKnn;
  c.student_hidden = {12, 6};
  c.reselect_every_step = true;
  std::ostringstream out;
  write_manifest(out, c);
  DistillConfig back;
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    apply_setting(back, line.substr(0, eq), line.substr(eq + 1));
  }
  std::ostringstream again;
  write_manifest(again, back);
  EXPECT_EQ(out.str(), again.str());
  EXPECT_EQ(back.student_hidden, (std::vector<std::size_t>{12, 6}));
}

TEST(Config, InfiniteEpsilonSetting) {
  DistillConfig c;
  c.epsilon = 0.1;
  apply_setting(c, "epsilon", "inf");
  EXPECT_TRUE(std::isinf(c.epsilon));
  expect_kind(ErrorKind::kConfig, [&] { apply_setting(c, "nonsense", "1"); });
}

TEST(Schedule, WarmupThenLinearDecay) {
  EXPECT_DOUBLE_EQ(lr_at(0, 100, 0.1, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(5, 100, 0.1, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(lr_at(10, 100, 0.1, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(55, 100, 0.1, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(lr_at(100, 100, 0.1, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(1, 3, 0.0, 2.0), 2.0);
  expect_kind(ErrorKind::kConfig, [] { lr_at(101, 100, 0.1, 1.0); });
}

TEST(Metrics, EpochRecordJsonRoundTrip) {
  EpochRecord r;
  r.epoch = 4;
  r.train_loss = 0.125;
  r.dev_accuracy = 0.75;
  r.augmented_forward = 12;
  r.scored_examples = 3;
  r.augmented_wall_time = 0.5;
  const auto back = epoch_record_from_json_line(to_json_line(r));
  EXPECT_EQ(back.epoch, 4);
  EXPECT_EQ(back.augmented_forward, 12u);
  EXPECT_EQ(back.scored_examples, 3u);
  EXPECT_DOUBLE_EQ(back.augmented_wall_time, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "mmknn_metrics.jsonl";
  {
    std::ofstream out(path);
    out << to_json_line(r) << "\n{\"summary\":true,\"best_epoch\":4}\n";
  }
  EXPECT_EQ(read_metrics(path).size(), 1u);
}

TEST(Pool, RerankedCandidatesCarryDistancesAndRanks) {
  auto c = small_config(Mode::kMinimaxKnn);
  const auto pool = fixture::make_pool(shared(), c);
  EXPECT_EQ(pool.size(), shared().data.train.size());
  for (const auto& [id, entry] : pool) {
    ASSERT_EQ(entry.candidates.size(), c.k);
    std::set<std::size_t> ids;
    for (std::size_t j = 0; j < entry.candidates.size(); ++j) {
      const auto& cand = entry.candidates[j];
      ids.insert(cand.repo_id);
      ASSERT_TRUE(cand.teacher_distance);
      EXPECT_EQ(cand.teacher_rank, j + 1);
      EXPECT_GE(cand.encoder_rank, 1u);
      EXPECT_LE(cand.encoder_rank, c.effective_retrieval_depth());
      if (j > 0) EXPECT_LE(*entry.candidates[j - 1].teacher_distance, *cand.teacher_distance);
    }
    EXPECT_EQ(ids.size(), c.k);
  }
}

TEST(Pool, RandomPoolIsDeterministic) {
  auto c = small_config(Mode::kRandomAug);
  c.rerank_by_teacher = false;
  const auto a = fixture::make_pool(shared(), c, true);
  const auto b = fixture::make_pool(shared(), c, true);
  for (const auto& [id, entry] : a) {
    ASSERT_EQ(entry.candidates.size(), b.at(id).candidates.size());
    for (std::size_t j = 0; j < entry.candidates.size(); ++j) {
      EXPECT_EQ(entry.candidates[j].repo_id, b.at(id).candidates[j].repo_id);
      EXPECT_EQ(entry.candidates[j].teacher_rank, 0u);
    }
  }
}

TEST(Pool, ThreadsDoNotChangeContent) {
  auto c = small_config(Mode::kMinimaxKnn);
  const auto one = fixture::make_pool(shared(), c);
  c.threads = 3;
  const auto three = fixture::make_pool(shared(), c);
  for (const auto& [id, entry] : one) {
    for (std::size_t j = 0; j < entry.candidates.size(); ++j) {
      EXPECT_EQ(entry.candidates[j].repo_id, three.at(id).candidates[j].repo_id);
      EXPECT_EQ(entry.candidates[j].teacher_distance, three.at(id).candidates[j].teacher_distance);
    }
  }
}

TEST(Distill, PassCountsPerMode) {
  const auto c = small_config(Mode::kMinimaxKnn);
  const auto pool = fixture::make_pool(shared(), c);
  const std::size_t m = shared().data.train.size();

  const auto mm = run(c, pool);
  for (const auto& r : mm.records) {
    EXPECT_EQ(r.original_forward, m);
    EXPECT_EQ(r.original_backward, m);
    EXPECT_EQ(r.augmented_backward, m * c.n);
    EXPECT_EQ(r.augmented_forward, m * c.k + m * c.n);
    EXPECT_EQ(r.scored_examples, m);
    EXPECT_EQ(r.forward_pass_count, r.original_forward + r.augmented_forward);
  }

  auto v = c;
  v.mode = Mode::kVanillaKnn;
  for (const auto& r : run(v, pool).records) {
    EXPECT_EQ(r.augmented_forward, m * c.k);
    EXPECT_EQ(r.augmented_backward, m * c.k);
    EXPECT_EQ(r.scored_examples, 0u);
  }

  auto kd = c;
  kd.mode = Mode::kKdOnly;
  for (const auto& r : run(kd, pool).records) {
    EXPECT_EQ(r.augmented_forward, 0u);
    EXPECT_EQ(r.augmented_backward, 0u);
  }
}

TEST(Distill, PerStepSelectionReusesTraces) {
  auto c = small_config(Mode::kMinimaxKnn);
  c.reselect_every_step = true;
  const auto pool = fixture::make_pool(shared(), c);
  const std::size_t m = shared().data.train.size();
  for (const auto& r : run(c, pool).records) {
    EXPECT_EQ(r.augmented_forward, m * c.k);
    EXPECT_EQ(r.augmented_backward, m * c.n);
  }
}

TEST(Distill, EpsilonLimitsVanillaCandidates) {
  auto c = small_config(Mode::kVanillaKnn);
  c.epsilon = 0.1;
  const auto pool = fixture::make_pool(shared(), c);
  std::size_t passing = 0;
  for (const auto& [id, entry] : pool) {
    for (const auto& cand : entry.candidates) passing += *cand.teacher_distance <= 0.1;
  }
  for (const auto& r : run(c, pool).records) EXPECT_EQ(r.augmented_backward, passing);
}

TEST(Distill, AugmentationStartsAtConfiguredEpoch) {
  auto c = small_config(Mode::kMinimaxKnn);
  c.aug_start_epoch = 2;
  c.early_stop_patience = 100;
  const auto pool = fixture::make_pool(shared(), c);
  const auto r = run(c, pool);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[0].augmented_forward, 0u);
  EXPECT_EQ(r.records[1].augmented_forward, 0u);
  EXPECT_GT(r.records[2].augmented_forward, 0u);
}

TEST(Distill, AugmentedEntriesCarryNoCrossEntropy) {
  const auto c = small_config(Mode::kMinimaxKnn);
  const auto pool = fixture::make_pool(shared(), c);
  std::size_t augmented = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& log) {
    for (const auto& e : log.entries) {
      if (!e.augmented) continue;
      ++augmented;
      EXPECT_EQ(e.terms.ce, 0.0);
      EXPECT_DOUBLE_EQ(e.terms.total, e.terms.kd);
    }
  };
  run(c, pool, hooks);
  EXPECT_EQ(augmented, shared().data.train.size() * c.n * c.max_epochs);
}

TEST(Distill, MinimaxWithFullSelectionEqualsVanilla) {
  auto c = small_config(Mode::kMinimaxKnn);
  c.n = c.k;
  const auto pool = fixture::make_pool(shared(), c);
  auto v = c;
  v.mode = Mode::kVanillaKnn;
  EXPECT_TRUE(run(c, pool).model == run(v, pool).model);
}

TEST(Distill, DeterministicForFixedSeedAndThreads) {
  auto c = small_config(Mode::kMinimaxKnn);
  const auto pool = fixture::make_pool(shared(), c);
  const auto a = run(c, pool);
  EXPECT_TRUE(a.model == run(c, pool).model);
  c.threads = 3;
  EXPECT_TRUE(a.model == run(c, pool).model);
}

TEST(Distill, EarlyStoppingKeepsBestEpoch) {
  auto c = small_config(Mode::kKdOnly);
  c.max_epochs = 40;
  c.early_stop_patience = 2;
  const auto pool = fixture::make_pool(shared(), c);
  const auto r = run(c, pool);
  EXPECT_LE(static_cast<int>(r.records.size()), c.max_epochs);
  EXPECT_EQ(static_cast<int>(r.records.size()), std::min(c.max_epochs, r.best_epoch + 1 + 2));
  EXPECT_NEAR(accuracy(r.model, shared().data.dev), r.best_dev_accuracy, 1e-12);
}

TEST(Distill, MissingPoolEntry) {
  const auto c = small_config(Mode::kVanillaKnn);
  AugmentationPool empty;
  expect_kind(ErrorKind::kCoverage, [&] { run(c, empty); });
}

TEST(Teacher, BeatsChance) {
  const auto& e = shared();
  EXPECT_GT(accuracy(e.teacher, e.data.test), 1.0 / e.data.num_classes + 0.1);
}

TEST(FewShot, BalancedSampleAndCappedDev) {
  SyntheticOptions o;
  o.train = 90;
  o.dev = 300;
  const auto d = make_synthetic_dataset(o);
  const auto [train, dev] = few_shot_subsample(d.train, d.dev, 3, 20, 200, 4);
  ASSERT_EQ(train.size(), 60u);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    ++counts[train[i].label];
    EXPECT_EQ(train[i].id, i);
  }
  for (auto c : counts) EXPECT_EQ(c, 20u);
  EXPECT_EQ(dev.size(), 200u);
  std::vector<std::size_t> dev_counts(3, 0);
  for (const auto& ex : dev) ++dev_counts[ex.label];
  for (auto c : dev_counts) EXPECT_NEAR(static_cast<double>(c), 200.0 / 3.0, 1.0);
  std::set<std::size_t> ids;
  for (const auto& ex : dev) ids.insert(ex.id);
  EXPECT_EQ(ids.size(), dev.size());

  const auto again = few_shot_subsample(d.train, d.dev, 3, 20, 200, 4);
  EXPECT_EQ(again.first, train);
  const auto small = few_shot_subsample(d.train, std::vector(d.dev.begin(), d.dev.begin() + 50),
                                        3, 20, 200, 4);
  EXPECT_EQ(small.second.size(), 50u);
  expect_kind(ErrorKind::kSampling, [&] { few_shot_subsample(d.train, d.dev, 3, 40, 200, 4); });
}

TEST(Ablation, NineRowsInOrder) {
  DistillConfig base;
  base.epsilon = 0.3;
  const auto rows = ablation_grid(base);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0].config.mode, Mode::kNoAug);
  EXPECT_EQ(rows[1].config.mode, Mode::kKdOnly);
  EXPECT_TRUE(rows[2].random_pool);
  EXPECT_FALSE(rows[2].config.rerank_by_teacher);
  EXPECT_TRUE(std::isinf(rows[6].config.epsilon));
  EXPECT_DOUBLE_EQ(rows[7].config.epsilon, 0.3);
  EXPECT_EQ(rows[8].config.mode, Mode::kMinimaxKnn);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].row, static_cast<int>(i + 1));
}
