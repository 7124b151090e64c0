// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmknn/error.hpp"

namespace mmknn {

/// Tolerance on the L2 norm of rows that are supposed to be unit length.
inline constexpr double kUnitNormTolerance = 1e-5;
inline constexpr double kNoEpsilon = std::numeric_limits<double>::infinity();

/// Returns v / ||v||. Throws kDegenerateVector for a zero or non-finite vector.
template <typename T>
std::vector<T> normalize(std::span<const T> v) {
  double sq = 0.0;
  for (T x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw Error(ErrorKind::kDegenerateVector, "non-finite component");
    }
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  if (!(sq > 0.0)) throw Error(ErrorKind::kDegenerateVector, "cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(v[i]) * inv);
  }
  return out;
}

inline std::vector<double> normalize(const std::vector<double>& v) {
  return normalize(std::span<const double>(v));
}

/// (1/pi) arccos(<a,b> / (|a||b|)), in [0,1]. Inputs need not be unit length.
/// Evaluated through the half-angle identity; identical and antipodal
/// directions give exactly 0 and 1.
double angular_distance(std::span<const double> a, std::span<const double> b);

/// Row-major float matrix with a fixed row width.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dim) : dim_(dim) {}
  EmbeddingMatrix(std::size_t dim, std::vector<float> data);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<float>& data() const noexcept { return data_; }

  void append_row(std::span<const float> values);
  /// Rescales every row to unit length; zero rows throw kDegenerateVector.
  void normalize_rows();
  /// Throws kInvalidInput unless every row has norm 1 +- kUnitNormTolerance.
  void check_unit_rows() const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Unlabelled sentences plus their embeddings. Row i of `embeddings`
/// belongs to sentences[i]; the row index is the sentence's repo id.
struct SentenceRepository {
  std::vector<std::string> sentences;
  EmbeddingMatrix embeddings;

  std::size_t size() const noexcept { return sentences.size(); }
  /// Checks alignment, finiteness and unit norms.
  void validate() const;
};

enum class RankSource { kEncoder, kTeacher, kRandom };

std::string_view to_string(RankSource source);

struct Candidate {
  std::size_t repo_id = 0;
  double cosine = 0.0;
  std::optional<double> teacher_distance;
  RankSource source = RankSource::kEncoder;
  /// 1-based position in the encoder ranking (0 when not retrieved by the encoder).
  std::size_t encoder_rank = 0;

  bool operator==(const Candidate&) const = default;
};

struct NeighborSet {
  std::size_t query_id = 0;
  std::vector<Candidate> candidates;

  std::vector<std::size_t> ids() const;
};

/// Exact inner-product search over unit-norm rows. Immutable once built and
/// safe for concurrent queries.
class FlatIndex {
 public:
  /// Throws kEmptyRepository for an empty matrix.
  static FlatIndex build(EmbeddingMatrix embeddings);
  static FlatIndex build(const SentenceRepository& repo);

  std::size_t size() const noexcept { return embeddings_.rows(); }
  std::size_t dim() const noexcept { return embeddings_.dim(); }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }

  /// Cosine similarity of `query` against row `repo_id` (dot product).
  double similarity(std::span<const float> query, std::size_t repo_id) const;

  /// The min(k, N) rows with highest cosine similarity, descending, ties by
  /// ascending repo id.
  NeighborSet knn_query(std::span<const float> query, std::size_t k,
                        std::size_t query_id = 0) const;

 private:
  explicit FlatIndex(EmbeddingMatrix embeddings) : embeddings_(std::move(embeddings)) {}
  EmbeddingMatrix embeddings_;
};

/// Fills teacher_distance for every candidate without reordering.
NeighborSet with_teacher_distances(NeighborSet neighbors,
                                   std::span<const double> teacher_query_repr,
                                   std::span<const std::vector<double>> teacher_candidate_reprs);

/// Stable re-sort by ascending teacher-space angular distance.
NeighborSet rerank_by_teacher(NeighborSet neighbors, std::span<const double> teacher_query_repr,
                              std::span<const std::vector<double>> teacher_candidate_reprs);

/// True when `distance` <= epsilon. An infinite epsilon admits everything,
/// including candidates without a distance; otherwise a missing distance
/// throws kIncompleteInput.
bool passes_epsilon(std::optional<double> distance, double epsilon);

/// Keeps candidates whose teacher distance is <= epsilon, order preserved.
NeighborSet filter_by_epsilon(const NeighborSet& neighbors, double epsilon);

/// `count` distinct repo ids drawn uniformly without replacement. When a query
/// is supplied the cosine field is filled with its similarity.
NeighborSet random_candidates(const FlatIndex& index, std::size_t count, std::uint64_t seed,
                              std::size_t query_id = 0, std::span<const float> query = {});

}  // namespace mmknn
