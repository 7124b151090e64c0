// SPDX-License-Identifier: Apache-2.0
#include "mmknn/embedding_index.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "mmknn/random.hpp"

namespace mmknn {

double angular_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimension, "angular_distance: dimension " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
  }
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorKind::kDegenerateVector, "angular_distance of a zero vector");
  }
  // arccos of the cosine loses ~1e-8 near 0 and 1; the half-angle form
  // 2 atan2(|a^ - b^|, |a^ + b^|) is exact at both ends.
  const double ia = 1.0 / std::sqrt(na);
  const double ib = 1.0 / std::sqrt(nb);
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double u = a[i] * ia;
    const double v = b[i] * ib;
    diff += (u - v) * (u - v);
    sum += (u + v) * (u + v);
  }
  const double angle = 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
  return std::clamp(angle / std::numbers::pi, 0.0, 1.0);
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw Error(ErrorKind::kDimension, "embedding dimension must be positive");
  if (data_.size() % dim_ != 0) {
    throw Error(ErrorKind::kDimension, "embedding data is not a whole number of rows");
  }
}

void EmbeddingMatrix::append_row(std::span<const float> values) {
  if (dim_ == 0) dim_ = values.size();
  if (values.size() != dim_ || dim_ == 0) {
    throw Error(ErrorKind::kDimension, "row of width " + std::to_string(values.size()) +
                                           " appended to matrix of width " + std::to_string(dim_));
  }
  data_.insert(data_.end(), values.begin(), values.end());
}

void EmbeddingMatrix::normalize_rows() {
  for (std::size_t r = 0; r < rows(); ++r) {
    std::vector<float> unit;
    try {
      unit = normalize(row(r));
    } catch (const Error& e) {
      throw Error(ErrorKind::kDegenerateVector, "row " + std::to_string(r) + ": " + e.what());
    }
    std::copy(unit.begin(), unit.end(), data_.begin() + static_cast<std::ptrdiff_t>(r * dim_));
  }
}

void EmbeddingMatrix::check_unit_rows() const {
  for (std::size_t r = 0; r < rows(); ++r) {
    double sq = 0.0;
    for (float x : row(r)) {
      if (!std::isfinite(x)) {
        throw Error(ErrorKind::kInvalidInput, "row " + std::to_string(r) + " is not finite");
      }
      sq += static_cast<double>(x) * x;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
      throw Error(ErrorKind::kInvalidInput, "row " + std::to_string(r) + " is not unit norm");
    }
  }
}

void SentenceRepository::validate() const {
  if (sentences.size() != embeddings.rows()) {
    throw Error(ErrorKind::kAlignment, std::to_string(sentences.size()) + " sentences but " +
                                           std::to_string(embeddings.rows()) + " embedding rows");
  }
  embeddings.check_unit_rows();
}

std::string_view to_string(RankSource source) {
  switch (source) {
    case RankSource::kEncoder: return "encoder";
    case RankSource::kTeacher: return "teacher";
    case RankSource::kRandom: return "random";
  }
  return "unknown";
}

std::vector<std::size_t> NeighborSet::ids() const {
  std::vector<std::size_t> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.repo_id);
  return out;
}

FlatIndex FlatIndex::build(EmbeddingMatrix embeddings) {
  if (embeddings.rows() == 0) throw Error(ErrorKind::kEmptyRepository, "no rows to index");
  embeddings.check_unit_rows();
  return FlatIndex(std::move(embeddings));
}

FlatIndex FlatIndex::build(const SentenceRepository& repo) {
  if (repo.size() == 0) throw Error(ErrorKind::kEmptyRepository, "repository has no sentences");
  repo.validate();
  return build(repo.embeddings);
}

double FlatIndex::similarity(std::span<const float> query, std::size_t repo_id) const {
  const auto row = embeddings_.row(repo_id);
  double dot = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    dot += static_cast<double>(query[i]) * static_cast<double>(row[i]);
  }
  return dot;
}

NeighborSet FlatIndex::knn_query(std::span<const float> query, std::size_t k,
                                 std::size_t query_id) const {
  if (query.size() != dim()) {
    throw Error(ErrorKind::kDimension, "query dimension " + std::to_string(query.size()) +
                                           " vs index dimension " + std::to_string(dim()));
  }
  if (k == 0) throw Error(ErrorKind::kInvalidInput, "k must be at least 1");

  struct Scored {
    double sim;
    std::size_t id;
  };
  std::vector<Scored> scored(size());
  for (std::size_t r = 0; r < size(); ++r) scored[r] = {similarity(query, r), r};

  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const Scored& a, const Scored& b) {
                      return a.sim != b.sim ? a.sim > b.sim : a.id < b.id;
                    });

  NeighborSet out;
  out.query_id = query_id;
  out.candidates.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    Candidate c;
    c.repo_id = scored[i].id;
    c.cosine = std::clamp(scored[i].sim, -1.0, 1.0);
    c.source = RankSource::kEncoder;
    c.encoder_rank = i + 1;
    out.candidates.push_back(c);
  }
  return out;
}

NeighborSet with_teacher_distances(NeighborSet neighbors, std::span<const double> teacher_query_repr,
                                   std::span<const std::vector<double>> teacher_candidate_reprs) {
  if (teacher_candidate_reprs.size() != neighbors.candidates.size()) {
    throw Error(ErrorKind::kIncompleteInput,
                std::to_string(neighbors.candidates.size()) + " candidates but " +
                    std::to_string(teacher_candidate_reprs.size()) + " teacher representations");
  }
  for (std::size_t i = 0; i < neighbors.candidates.size(); ++i) {
    if (teacher_candidate_reprs[i].empty()) {
      throw Error(ErrorKind::kIncompleteInput, "missing teacher representation for candidate " +
                                                   std::to_string(i));
    }
    neighbors.candidates[i].teacher_distance =
        angular_distance(teacher_query_repr, teacher_candidate_reprs[i]);
  }
  return neighbors;
}

NeighborSet rerank_by_teacher(NeighborSet neighbors, std::span<const double> teacher_query_repr,
                              std::span<const std::vector<double>> teacher_candidate_reprs) {
  neighbors = with_teacher_distances(std::move(neighbors), teacher_query_repr,
                                     teacher_candidate_reprs);
  std::stable_sort(neighbors.candidates.begin(), neighbors.candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return *a.teacher_distance < *b.teacher_distance;
                   });
  for (auto& c : neighbors.candidates) c.source = RankSource::kTeacher;
  return neighbors;
}

bool passes_epsilon(std::optional<double> distance, double epsilon) {
  if (std::isinf(epsilon) && epsilon > 0) return true;
  if (!distance) {
    throw Error(ErrorKind::kIncompleteInput,
                "finite epsilon requires teacher distances on every candidate");
  }
  return *distance <= epsilon;
}

NeighborSet filter_by_epsilon(const NeighborSet& neighbors, double epsilon) {
  NeighborSet out;
  out.query_id = neighbors.query_id;
  for (const auto& c : neighbors.candidates) {
    if (passes_epsilon(c.teacher_distance, epsilon)) out.candidates.push_back(c);
  }
  return out;
}

NeighborSet random_candidates(const FlatIndex& index, std::size_t count, std::uint64_t seed,
                              std::size_t query_id, std::span<const float> query) {
  const std::size_t n = index.size();
  if (count > n) {
    throw Error(ErrorKind::kSampling, "cannot draw " + std::to_string(count) +
                                          " distinct rows from " + std::to_string(n));
  }
  if (!query.empty() && query.size() != index.dim()) {
    throw Error(ErrorKind::kDimension, "query dimension mismatch");
  }
  // Partial Fisher-Yates over a sparse permutation, O(count).
  Rng rng(seed);
  std::unordered_map<std::size_t, std::size_t> swapped;  // position -> value
  auto value_at = [&](std::size_t pos) {
    const auto it = swapped.find(pos);
    return it == swapped.end() ? pos : it->second;
  };
  auto set_at = [&](std::size_t pos, std::size_t value) { swapped[pos] = value; };

  NeighborSet out;
  out.query_id = query_id;
  out.candidates.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    const std::size_t vi = value_at(i);
    const std::size_t vj = value_at(j);
    set_at(i, vj);
    set_at(j, vi);
    Candidate c;
    c.repo_id = vj;
    c.source = RankSource::kRandom;
    if (!query.empty()) c.cosine = std::clamp(index.similarity(query, vj), -1.0, 1.0);
    out.candidates.push_back(c);
  }
  return out;
}

}  // namespace mmknn
