// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "mmknn/embedding_index.hpp"

namespace mmknn {

/// Embedding files.
///
/// Binary: magic "EMB1", u32 row count, u32 dim (little-endian), then
/// rows x dim float32 little-endian. Any file not starting with the magic is
/// read as text: one row per line, whitespace-separated decimals.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_embeddings_binary(const std::filesystem::path& path, const EmbeddingMatrix& m);
/// Writes max_digits10 decimals; text and binary round-trip to the same floats.
void write_embeddings_text(const std::filesystem::path& path, const EmbeddingMatrix& m);

}  // namespace mmknn
