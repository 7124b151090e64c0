// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mmknn/embedder.hpp"
#include "mmknn/embedding_index.hpp"

namespace mmknn {

struct LabeledExample {
  std::size_t id = 0;
  std::string text;
  std::size_t label = 0;

  bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  std::vector<LabeledExample> test;
  std::vector<std::string> label_names;

  std::size_t num_classes() const noexcept { return label_names.size(); }
  /// Unique ids per split, labels in range, non-empty texts (kSchema otherwise).
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Dataset files are line-delimited JSON records {"text": ..., "label": ...}
/// with an optional integer "id". Labels are either class indices or names.
///
/// `load_dataset` accepts a directory holding train.jsonl and optionally
/// dev.jsonl, test.jsonl and a labels.txt sidecar (one name per line), or a
/// single .jsonl file that becomes the train split. Without a sidecar, names
/// are inferred: integer labels 0..max become "0".."max", string labels are
/// sorted. Missing ids are assigned sequentially.
Dataset load_dataset(const std::filesystem::path& path);

/// One split file. `label_names` is used to resolve labels; when empty it is
/// inferred from the file and written back.
std::vector<LabeledExample> load_examples(const std::filesystem::path& path,
                                          std::vector<std::string>& label_names);

void save_examples(const std::filesystem::path& path, const std::vector<LabeledExample>& examples);
/// Writes train/dev/test .jsonl plus labels.txt into `dir` (created if needed).
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Sentences (UTF-8, one per line) plus an embedding file (EMB1 binary or
/// text), row i belonging to line i. Rows are normalized on ingestion.
/// Throws kAlignment on a count mismatch.
SentenceRepository load_repository(const std::filesystem::path& sentences,
                                   const std::filesystem::path& embeddings);

/// Repository embedded with the fallback hashed n-gram embedder.
SentenceRepository embed_repository(std::vector<std::string> sentences,
                                    const HashedNgramEmbedder& embedder);

}  // namespace mmknn
