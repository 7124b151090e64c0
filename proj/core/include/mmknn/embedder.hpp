// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmknn/embedding_index.hpp"

namespace mmknn {

/// Deterministic stand-in for a learned sentence encoder.
///
/// Character n-grams of the lower-cased, space-padded text are hashed (FNV-1a)
/// and each n-gram contributes a fixed pseudo-random +-1 vector of length
/// `dim` derived from its hash and the seed. The summed vector is
/// unit-normalized. The same embedder featurizes model inputs and repository
/// sentences, so every text maps to one fixed-length vector.
class HashedNgramEmbedder {
 public:
  struct Options {
    std::size_t dim = 64;
    std::size_t ngram = 3;
    std::uint64_t seed = 0x5eed;
  };

  HashedNgramEmbedder() : HashedNgramEmbedder(Options{}) {}
  explicit HashedNgramEmbedder(Options options);

  std::size_t dim() const noexcept { return options_.dim; }
  const Options& options() const noexcept { return options_; }

  std::vector<float> embed(std::string_view text) const;
  EmbeddingMatrix embed_all(std::span<const std::string> texts) const;

 private:
  Options options_;
};

}  // namespace mmknn
