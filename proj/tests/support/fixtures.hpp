// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mmknn/embedder.hpp"
#include "mmknn/synthetic.hpp"
#include "mmknn/trainer.hpp"

namespace fixture {

/// A small synthetic experiment: data, repository index, teacher.
struct Experiment {
  mmknn::Dataset dataset;
  mmknn::ExperimentData data;
  mmknn::MLPClassifier teacher;
};

struct ExperimentOptions {
  std::size_t train = 60;
  std::size_t dev = 30;
  std::size_t test = 90;
  std::size_t repository = 400;
  std::size_t teacher_train = 300;
  std::size_t embed_dim = 128;
  std::uint64_t seed = 3;
  int teacher_epochs = 20;
};

inline Experiment make_experiment(const ExperimentOptions& o = {}) {
  mmknn::SyntheticOptions so;
  so.train = o.train;
  so.dev = o.dev;
  so.test = o.test;
  so.repository = o.repository;
  so.teacher_train = o.teacher_train;
  so.seed = o.seed;
  Experiment e;
  e.dataset = mmknn::make_synthetic_dataset(so);
  const mmknn::HashedNgramEmbedder embedder({o.embed_dim, 3, 0x5eed});
  const auto repo = mmknn::embed_repository(mmknn::make_synthetic_repository(so), embedder);
  e.data = mmknn::prepare_experiment(e.dataset, &repo, embedder);

  mmknn::DistillConfig tc;
  tc.max_epochs = o.teacher_epochs;
  tc.teacher_hidden = {16};
  tc.seed = o.seed;
  const auto teacher_train = mmknn::featurize(mmknn::make_synthetic_teacher_set(so), embedder);
  e.teacher = mmknn::train_teacher(teacher_train, e.data.dev, e.data.num_classes, tc).model;
  return e;
}

inline mmknn::AugmentationPool make_pool(const Experiment& e, const mmknn::DistillConfig& c,
                                         bool random = false) {
  return mmknn::build_pool(e.data.train, e.data.train_queries, e.data.source(), e.teacher,
                           mmknn::pool_options(c, random));
}

inline std::vector<double> random_logits(std::mt19937_64& rng, std::size_t classes,
                                         double scale = 5.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> z(classes);
  for (double& v : z) v = u(rng);
  return z;
}

}  // namespace fixture
