// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmknn/data_io.hpp"

namespace mmknn {

/// Generator for a toy topic-classification task built from pseudo-words.
///
/// Every class owns a set of cue words; sentences mix cue words of their own
/// class, cue words of a random other class (confusers) and shared filler
/// words. Repository sentences come from the same process with a random class
/// and a random cue rate, so some are clean paraphrases and some are noise.
struct SyntheticOptions {
  std::size_t classes = 3;
  std::size_t train = 600;
  std::size_t dev = 300;
  std::size_t test = 1500;
  std::size_t repository = 10000;
  std::size_t teacher_train = 3000;
  std::size_t cue_words_per_class = 24;
  std::size_t filler_words = 400;
  std::size_t min_words = 6;
  std::size_t max_words = 12;
  double cue_rate = 0.35;
  double confuser_rate = 0.12;
  std::uint64_t seed = 7;
};

/// Labelled splits with label names "topic_0", "topic_1", ...
Dataset make_synthetic_dataset(const SyntheticOptions& options);

/// A larger labelled sample from the same distribution, drawn from its own
/// stream, for training a teacher stronger than the student.
std::vector<LabeledExample> make_synthetic_teacher_set(const SyntheticOptions& options);

/// Unlabelled sentences drawn from the same vocabulary.
std::vector<std::string> make_synthetic_repository(const SyntheticOptions& options);

}  // namespace mmknn
