// SPDX-License-Identifier: Apache-2.0
#include "mmknn/embedder.hpp"

#include <cctype>

#include "mmknn/error.hpp"
#include "mmknn/random.hpp"

namespace mmknn {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

HashedNgramEmbedder::HashedNgramEmbedder(Options options) : options_(options) {
  if (options_.dim == 0) throw Error(ErrorKind::kConfig, "embedder dimension must be positive");
  if (options_.ngram == 0) throw Error(ErrorKind::kConfig, "n-gram length must be positive");
}

std::vector<float> HashedNgramEmbedder::embed(std::string_view text) const {
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back(' ');
  for (unsigned char c : text) padded.push_back(static_cast<char>(std::tolower(c)));
  padded.push_back(' ');
  while (padded.size() < options_.ngram) padded.push_back(' ');

  const std::size_t dim = options_.dim;
  std::vector<double> acc(dim, 0.0);
  for (std::size_t start = 0; start + options_.ngram <= padded.size(); ++start) {
    const std::uint64_t h =
        fnv1a(std::string_view(padded).substr(start, options_.ngram)) ^ options_.seed;
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      if (j % 64 == 0) bits = mix_seed(h + j);
      acc[j] += (bits & 1ULL) ? 1.0 : -1.0;
      bits >>= 1;
    }
  }
  std::vector<double> unit = normalize(acc);
  return {unit.begin(), unit.end()};
}

EmbeddingMatrix HashedNgramEmbedder::embed_all(std::span<const std::string> texts) const {
  EmbeddingMatrix out(options_.dim);
  for (const auto& t : texts) out.append_row(embed(t));
  return out;
}

}  // namespace mmknn
