// SPDX-License-Identifier: Apache-2.0
#include "mmknn/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <variant>

#include <json.hpp>

#include "mmknn/embedding_io.hpp"
#include "mmknn/error.hpp"

namespace mmknn {
namespace {

using json = nlohmann::json;

struct RawRecord {
  std::optional<std::size_t> id;
  std::string text;
  std::variant<std::size_t, std::string> label;
  std::size_t line = 0;
};

std::vector<RawRecord> read_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kParse, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.contains("label") || !j["text"].is_string()) {
      throw Error(ErrorKind::kParse, where + ": expected an object with \"text\" and \"label\"");
    }
    RawRecord r;
    r.line = line_no;
    r.text = j["text"].get<std::string>();
    const auto& label = j["label"];
    if (label.is_number_unsigned()) {
      r.label = label.get<std::size_t>();
    } else if (label.is_string()) {
      r.label = label.get<std::string>();
    } else {
      throw Error(ErrorKind::kParse, where + ": label must be a non-negative integer or a string");
    }
    if (j.contains("id")) {
      if (!j["id"].is_number_unsigned()) {
        throw Error(ErrorKind::kParse, where + ": id must be a non-negative integer");
      }
      r.id = j["id"].get<std::size_t>();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> infer_label_names(const std::vector<const std::vector<RawRecord>*>& splits) {
  bool any_int = false, any_str = false;
  std::size_t max_int = 0;
  std::set<std::string> names;
  for (const auto* split : splits) {
    for (const auto& r : *split) {
      if (const auto* i = std::get_if<std::size_t>(&r.label)) {
        any_int = true;
        max_int = std::max(max_int, *i);
      } else {
        any_str = true;
        names.insert(std::get<std::string>(r.label));
      }
    }
  }
  if (any_int && any_str) {
    throw Error(ErrorKind::kSchema, "labels mix class indices and names; add a labels.txt sidecar");
  }
  std::vector<std::string> out;
  if (any_int) {
    for (std::size_t i = 0; i <= max_int; ++i) out.push_back(std::to_string(i));
  } else {
    out.assign(names.begin(), names.end());
  }
  return out;
}

std::vector<LabeledExample> resolve(const std::vector<RawRecord>& raw,
                                    const std::vector<std::string>& label_names,
                                    const std::filesystem::path& path) {
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < label_names.size(); ++i) by_name.emplace(label_names[i], i);

  std::vector<LabeledExample> out;
  out.reserve(raw.size());
  std::set<std::size_t> seen;
  std::size_t next_id = 0;
  for (const auto& r : raw) {
    if (r.id) next_id = std::max(next_id, *r.id + 1);
  }
  for (const auto& r : raw) {
    const std::string where = path.string() + ":" + std::to_string(r.line);
    LabeledExample ex;
    ex.text = r.text;
    if (const auto* i = std::get_if<std::size_t>(&r.label)) {
      if (*i >= label_names.size()) {
        throw Error(ErrorKind::kSchema, where + ": label " + std::to_string(*i) + " out of range");
      }
      ex.label = *i;
    } else {
      const auto it = by_name.find(std::get<std::string>(r.label));
      if (it == by_name.end()) {
        throw Error(ErrorKind::kSchema,
                    where + ": unknown label \"" + std::get<std::string>(r.label) + "\"");
      }
      ex.label = it->second;
    }
    ex.id = r.id ? *r.id : next_id++;
    if (!seen.insert(ex.id).second) {
      throw Error(ErrorKind::kSchema, where + ": duplicate id " + std::to_string(ex.id));
    }
    if (ex.text.empty()) throw Error(ErrorKind::kSchema, where + ": empty text");
    out.push_back(std::move(ex));
  }
  return out;
}

void check_split(const std::vector<LabeledExample>& split, std::size_t classes,
                 const std::string& name) {
  std::set<std::size_t> ids;
  for (const auto& ex : split) {
    if (!ids.insert(ex.id).second) {
      throw Error(ErrorKind::kSchema, name + ": duplicate id " + std::to_string(ex.id));
    }
    if (ex.label >= classes) {
      throw Error(ErrorKind::kSchema, name + ": label " + std::to_string(ex.label) +
                                          " out of range");
    }
    if (ex.text.empty()) throw Error(ErrorKind::kSchema, name + ": empty text");
  }
}

}  // namespace

void Dataset::validate() const {
  if (label_names.size() < 2) throw Error(ErrorKind::kSchema, "dataset needs at least 2 labels");
  check_split(train, label_names.size(), "train");
  check_split(dev, label_names.size(), "dev");
  check_split(test, label_names.size(), "test");
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<LabeledExample> load_examples(const std::filesystem::path& path,
                                          std::vector<std::string>& label_names) {
  const auto raw = read_raw(path);
  if (label_names.empty()) label_names = infer_label_names({&raw});
  return resolve(raw, label_names, path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  Dataset ds;
  if (!std::filesystem::is_directory(path)) {
    ds.name = path.stem().string();
    ds.train = load_examples(path, ds.label_names);
    ds.validate();
    return ds;
  }

  ds.name = path.filename().empty() ? path.parent_path().filename().string()
                                    : path.filename().string();
  const auto train_path = path / "train.jsonl";
  if (!std::filesystem::exists(train_path)) {
    throw Error(ErrorKind::kIo, "missing " + train_path.string());
  }
  const auto train_raw = read_raw(train_path);
  std::vector<RawRecord> dev_raw, test_raw;
  if (std::filesystem::exists(path / "dev.jsonl")) dev_raw = read_raw(path / "dev.jsonl");
  if (std::filesystem::exists(path / "test.jsonl")) test_raw = read_raw(path / "test.jsonl");

  if (std::filesystem::exists(path / "labels.txt")) {
    for (auto& name : read_lines(path / "labels.txt")) {
      if (!name.empty()) ds.label_names.push_back(std::move(name));
    }
  } else {
    ds.label_names = infer_label_names({&train_raw, &dev_raw, &test_raw});
  }
  ds.train = resolve(train_raw, ds.label_names, train_path);
  ds.dev = resolve(dev_raw, ds.label_names, path / "dev.jsonl");
  ds.test = resolve(test_raw, ds.label_names, path / "test.jsonl");
  ds.validate();
  return ds;
}

void save_examples(const std::filesystem::path& path, const std::vector<LabeledExample>& examples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& ex : examples) {
    json j;
    j["id"] = ex.id;
    j["text"] = ex.text;
    j["label"] = ex.label;
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  save_examples(dir / "train.jsonl", dataset.train);
  save_examples(dir / "dev.jsonl", dataset.dev);
  save_examples(dir / "test.jsonl", dataset.test);
  write_lines(dir / "labels.txt", dataset.label_names);
}

SentenceRepository load_repository(const std::filesystem::path& sentences,
                                   const std::filesystem::path& embeddings) {
  SentenceRepository repo;
  repo.sentences = read_lines(sentences);
  while (!repo.sentences.empty() && repo.sentences.back().empty()) repo.sentences.pop_back();
  repo.embeddings = read_embeddings(embeddings);
  if (repo.sentences.size() != repo.embeddings.rows()) {
    throw Error(ErrorKind::kAlignment, std::to_string(repo.sentences.size()) + " sentences in " +
                                           sentences.string() + " but " +
                                           std::to_string(repo.embeddings.rows()) +
                                           " embedding rows in " + embeddings.string());
  }
  repo.embeddings.normalize_rows();
  repo.validate();
  return repo;
}

SentenceRepository embed_repository(std::vector<std::string> sentences,
                                    const HashedNgramEmbedder& embedder) {
  SentenceRepository repo;
  repo.embeddings = embedder.embed_all(sentences);
  repo.sentences = std::move(sentences);
  repo.validate();
  return repo;
}

}  // namespace mmknn
