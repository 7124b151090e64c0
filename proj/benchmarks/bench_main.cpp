// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mmknn/embedding_index.hpp"
#include "mmknn/minimax_selector.hpp"
#include "mmknn/models.hpp"

namespace {

mmknn::EmbeddingMatrix random_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  mmknn::EmbeddingMatrix m(dim);
  std::vector<float> row(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : row) v = g(rng);
    m.append_row(row);
  }
  m.normalize_rows();
  return m;
}

void BM_KnnQuery(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto index = mmknn::FlatIndex::build(random_rows(rows, 64, 1));
  const auto queries = random_rows(64, 64, 2);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.knn_query(queries.row(q++ % queries.rows()), 8));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_KnnQuery)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_ForwardBackward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto model = mmknn::MLPClassifier::create({dim, 8, 3}, 3);
  const mmknn::Vector x = mmknn::Vector::Ones(static_cast<Eigen::Index>(dim));
  auto grads = mmknn::Gradients::zeros_like(model);
  const std::vector<double> logit_grad{0.1, -0.2, 0.1};
  for (auto _ : state) {
    const auto trace = model.trace(x);
    mmknn::backward(model, trace, logit_grad, grads);
    benchmark::DoNotOptimize(grads.weights[0].data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(512);

void BM_MinimaxRound(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const std::size_t examples = 256, dim = 64;
  const auto student = mmknn::MLPClassifier::create({dim, 8, 3}, 5);
  const auto features = random_rows(examples * k, dim, 4);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  mmknn::AugmentationPool pool;
  std::vector<std::size_t> batch;
  for (std::size_t e = 0; e < examples; ++e) {
    mmknn::PoolEntry entry{e, {}};
    for (std::size_t j = 0; j < k; ++j) {
      mmknn::PoolCandidate c;
      c.repo_id = e * k + j;
      c.features = mmknn::to_vector(features.row(c.repo_id));
      c.teacher_logits = {g(rng), g(rng), g(rng)};
      c.teacher_distance = 0.1;
      entry.candidates.push_back(std::move(c));
    }
    pool.insert(std::move(entry));
    batch.push_back(e);
  }
  mmknn::RoundOptions options;
  options.n = k / 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmknn::minimax_round(batch, pool, student, options));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(examples));
}
BENCHMARK(BM_MinimaxRound)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
