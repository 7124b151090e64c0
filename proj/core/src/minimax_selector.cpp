// SPDX-License-Identifier: Apache-2.0
#include "mmknn/minimax_selector.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "mmknn/embedding_index.hpp"
#include "mmknn/error.hpp"

namespace mmknn {

void AugmentationPool::insert(PoolEntry entry) {
  const std::size_t id = entry.example_id;
  entries_.insert_or_assign(id, std::move(entry));
}

const PoolEntry& AugmentationPool::at(std::size_t example_id) const {
  const auto it = entries_.find(example_id);
  if (it == entries_.end()) {
    throw Error(ErrorKind::kCoverage,
                "augmentation pool has no entry for example " + std::to_string(example_id));
  }
  return it->second;
}

std::size_t AugmentationPool::total_candidates() const {
  std::size_t total = 0;
  for (const auto& [id, entry] : entries_) total += entry.candidates.size();
  return total;
}

namespace {

double score_one(const PoolCandidate& c, const Logits& student_logits, double temperature) {
  if (c.teacher_logits.size() != student_logits.size()) {
    throw Error(ErrorKind::kIncompatibleModels,
                "teacher predicts " + std::to_string(c.teacher_logits.size()) +
                    " classes, student " + std::to_string(student_logits.size()));
  }
  const Probs teacher = softmax_with_temperature(c.teacher_logits, temperature);
  const Probs student = softmax_with_temperature(student_logits, temperature);
  return std::max(0.0, kl_divergence(teacher, student));
}

SelectionResult select_for_entry(const PoolEntry& entry, const MLPClassifier& student,
                                 const RoundOptions& options) {
  SelectionResult result;
  result.example_id = entry.example_id;
  result.epoch = options.epoch;
  const std::size_t m = entry.candidates.size();

  std::vector<ForwardTrace> traces;
  if (options.keep_traces) traces.reserve(m);
  result.kl_scores.reserve(m);
  result.passing.reserve(m);
  std::vector<std::size_t> repo_ids;
  repo_ids.reserve(m);
  for (const auto& c : entry.candidates) {
    ForwardTrace t = student.trace(c.features);
    result.kl_scores.push_back(score_one(c, to_std(t.logits()), options.score_temperature));
    if (options.keep_traces) traces.push_back(std::move(t));
    result.passing.push_back(passes_epsilon(c.teacher_distance, options.epsilon));
    repo_ids.push_back(c.repo_id);
  }
  result.selected = select_top_n(result.kl_scores, repo_ids, options.n, result.passing);
  if (options.keep_traces) {
    for (std::size_t idx : result.selected) result.selected_traces.push_back(traces[idx]);
  }
  return result;
}

}  // namespace

std::vector<double> score_candidates(const PoolEntry& entry, const MLPClassifier& student,
                                     double score_temperature) {
  std::vector<double> scores;
  scores.reserve(entry.candidates.size());
  for (const auto& c : entry.candidates) {
    scores.push_back(score_one(c, student.forward(c.features), score_temperature));
  }
  return scores;
}

std::vector<std::size_t> select_top_n(std::span<const double> scores,
                                      std::span<const std::size_t> repo_ids, std::size_t n,
                                      const std::vector<bool>& passing) {
  if (scores.size() != repo_ids.size() || scores.size() != passing.size()) {
    throw Error(ErrorKind::kDimension, "scores, repo ids and mask differ in length");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (passing[i]) eligible.push_back(i);
  }
  const std::size_t take = std::min(n, eligible.size());
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take),
                    eligible.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      if (repo_ids[a] != repo_ids[b]) return repo_ids[a] < repo_ids[b];
                      return a < b;
                    });
  eligible.resize(take);
  return eligible;
}

RoundResult minimax_round(std::span<const std::size_t> batch, const AugmentationPool& pool,
                          const MLPClassifier& student, const RoundOptions& options) {
  // Coverage check before any work.
  std::vector<const PoolEntry*> entries;
  entries.reserve(batch.size());
  for (std::size_t id : batch) entries.push_back(&pool.at(id));

  RoundResult out;
  out.selections.resize(batch.size());
  for (const PoolEntry* e : entries) out.forward_passes += e->candidates.size();

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, batch.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out.selections[i] = select_for_entry(*entries[i], student, options);
    }
    return out;
  }

  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool_threads;
  pool_threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool_threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < entries.size(); i += workers) {
          out.selections[i] = select_for_entry(*entries[i], student, options);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool_threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

SelectionTrace make_trace(const SelectionResult& result, const PoolEntry& entry) {
  SelectionTrace trace;
  trace.epoch = result.epoch;
  trace.example_id = result.example_id;
  for (const auto& c : entry.candidates) trace.repo_ids.push_back(c.repo_id);
  trace.scores = result.kl_scores;
  trace.passing = result.passing;
  for (std::size_t idx : result.selected) {
    trace.selected_repo_ids.push_back(entry.candidates.at(idx).repo_id);
  }
  return trace;
}

std::string to_json_line(const SelectionTrace& trace) {
  nlohmann::json j;
  j["epoch"] = trace.epoch;
  j["example_id"] = trace.example_id;
  j["repo_ids"] = trace.repo_ids;
  j["scores"] = trace.scores;
  j["passing"] = trace.passing;
  j["selected"] = trace.selected_repo_ids;
  return j.dump();
}

SelectionTrace trace_from_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SelectionTrace t;
    t.epoch = j.at("epoch").get<int>();
    t.example_id = j.at("example_id").get<std::size_t>();
    t.repo_ids = j.at("repo_ids").get<std::vector<std::size_t>>();
    t.scores = j.at("scores").get<std::vector<double>>();
    t.passing = j.at("passing").get<std::vector<bool>>();
    t.selected_repo_ids = j.at("selected").get<std::vector<std::size_t>>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("selection trace: ") + e.what());
  }
}

SelectionTraceWriter::SelectionTraceWriter(const std::filesystem::path& path)
    : out_(path, std::ios::trunc) {
  if (!out_) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

void SelectionTraceWriter::write(const SelectionTrace& trace) {
  out_ << to_json_line(trace) << '\n';
}

std::vector<SelectionTrace> read_selection_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<SelectionTrace> traces;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    traces.push_back(trace_from_json_line(line));
  }
  return traces;
}

}  // namespace mmknn
