// SPDX-License-Identifier: Apache-2.0
#include "mmknn/synthetic.hpp"

#include <set>
#include <string_view>

#include "mmknn/error.hpp"
#include "mmknn/random.hpp"

namespace mmknn {
namespace {

enum Stream : std::uint64_t { kVocabulary = 11, kTrain = 12, kDev = 13, kTest = 14, kRepo = 15, kTeacherSet = 16 };

struct Vocabulary {
  std::vector<std::vector<std::string>> cues;
  std::vector<std::string> fillers;
};

std::string pseudo_word(Rng& rng) {
  static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p",
                                                 "r", "s", "t", "v", "z", "br", "st", "tr", "pl"};
  static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::string word;
  const std::size_t syllables = 2 + uniform_index(rng, 2);
  for (std::size_t s = 0; s < syllables; ++s) {
    word += kOnsets[uniform_index(rng, std::size(kOnsets))];
    word += kVowels[uniform_index(rng, std::size(kVowels))];
  }
  if (uniform_index(rng, 2) == 0) word += kOnsets[uniform_index(rng, 12)];
  return word;
}

Vocabulary make_vocabulary(const SyntheticOptions& o) {
  Rng rng(derive_seed(o.seed, kVocabulary));
  std::set<std::string> used;
  auto fresh = [&] {
    for (;;) {
      std::string w = pseudo_word(rng);
      if (used.insert(w).second) return w;
    }
  };
  Vocabulary v;
  v.cues.resize(o.classes);
  for (auto& cues : v.cues) {
    for (std::size_t i = 0; i < o.cue_words_per_class; ++i) cues.push_back(fresh());
  }
  for (std::size_t i = 0; i < o.filler_words; ++i) v.fillers.push_back(fresh());
  return v;
}

std::string sentence(Rng& rng, const Vocabulary& v, const SyntheticOptions& o, std::size_t label,
                     double cue_rate) {
  const std::size_t length = o.min_words + uniform_index(rng, o.max_words - o.min_words + 1);
  std::size_t confuser = label;
  if (o.classes > 1) {
    confuser = (label + 1 + uniform_index(rng, o.classes - 1)) % o.classes;
  }
  std::string out;
  bool has_cue = false;
  for (std::size_t i = 0; i < length; ++i) {
    const double u = uniform_unit(rng);
    const std::vector<std::string>* words = &v.fillers;
    if (u < cue_rate) {
      words = &v.cues[label];
      has_cue = true;
    } else if (u < cue_rate + o.confuser_rate) {
      words = &v.cues[confuser];
    }
    if (i) out += ' ';
    out += (*words)[uniform_index(rng, words->size())];
  }
  if (!has_cue && cue_rate > 0.0) {
    out += ' ';
    out += v.cues[label][uniform_index(rng, v.cues[label].size())];
  }
  return out;
}

std::vector<LabeledExample> split(const Vocabulary& v, const SyntheticOptions& o, std::size_t count,
                                  std::uint64_t stream) {
  Rng rng(derive_seed(o.seed, stream));
  std::vector<std::size_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = i % o.classes;
  for (std::size_t i = count; i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(rng, i)]);
  std::vector<LabeledExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({i, sentence(rng, v, o, labels[i], o.cue_rate), labels[i]});
  }
  return out;
}

void check(const SyntheticOptions& o) {
  if (o.classes < 2) throw Error(ErrorKind::kConfig, "need at least 2 classes");
  if (o.cue_words_per_class == 0 || o.filler_words == 0) {
    throw Error(ErrorKind::kConfig, "vocabularies must be non-empty");
  }
  if (o.min_words == 0 || o.max_words < o.min_words) {
    throw Error(ErrorKind::kConfig, "invalid sentence length range");
  }
  if (o.cue_rate < 0.0 || o.confuser_rate < 0.0 || o.cue_rate + o.confuser_rate > 1.0) {
    throw Error(ErrorKind::kConfig, "cue and confuser rates must be probabilities");
  }
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticOptions& options) {
  check(options);
  const Vocabulary v = make_vocabulary(options);
  Dataset ds;
  ds.name = "synthetic";
  for (std::size_t c = 0; c < options.classes; ++c) {
    ds.label_names.push_back("topic_" + std::to_string(c));
  }
  ds.train = split(v, options, options.train, kTrain);
  ds.dev = split(v, options, options.dev, kDev);
  ds.test = split(v, options, options.test, kTest);
  return ds;
}

std::vector<LabeledExample> make_synthetic_teacher_set(const SyntheticOptions& options) {
  check(options);
  return split(make_vocabulary(options), options, options.teacher_train, kTeacherSet);
}

std::vector<std::string> make_synthetic_repository(const SyntheticOptions& options) {
  check(options);
  const Vocabulary v = make_vocabulary(options);
  Rng rng(derive_seed(options.seed, kRepo));
  std::vector<std::string> out;
  out.reserve(options.repository);
  for (std::size_t i = 0; i < options.repository; ++i) {
    const std::size_t label = uniform_index(rng, options.classes);
    const double rate = (1.0 - options.confuser_rate) * uniform_unit(rng);
    out.push_back(sentence(rng, v, options, label, rate));
  }
  return out;
}

}  // namespace mmknn
