// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "expect_error.hpp"
#include "mmknn/data_io.hpp"
#include "mmknn/embedding_io.hpp"
#include "mmknn/synthetic.hpp"

using namespace mmknn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mmknn_data_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream(path) << content;
}

}  // namespace

TEST(LoadDataset, StringLabelsSortedWithoutSidecar) {
  const auto dir = scratch("strings");
  write_file(dir / "train.jsonl",
             "{\"text\": \"good film\", \"label\": \"pos\"}\n"
             "{\"text\": \"bad film\", \"label\": \"neg\"}\n");
  write_file(dir / "dev.jsonl", "{\"text\": \"fine\", \"label\": \"pos\", \"id\": 7}\n");
  const auto d = load_dataset(dir);
  EXPECT_EQ(d.label_names, (std::vector<std::string>{"neg", "pos"}));
  ASSERT_EQ(d.train.size(), 2u);
  EXPECT_EQ(d.train[0].label, 1u);
  EXPECT_EQ(d.train[1].id, 1u);
  EXPECT_EQ(d.dev[0].id, 7u);
  EXPECT_TRUE(d.test.empty());
}

TEST(LoadDataset, SidecarResolvesNamesAndIndices) {
  const auto dir = scratch("sidecar");
  write_file(dir / "labels.txt", "sports\nworld\nscience\n");
  write_file(dir / "train.jsonl",
             "{\"text\": \"a\", \"label\": \"science\"}\n{\"text\": \"b\", \"label\": 1}\n"
             "{\"text\": \"c\", \"label\": 0}\n");
  const auto d = load_dataset(dir);
  EXPECT_EQ(d.num_classes(), 3u);
  EXPECT_EQ(d.train[0].label, 2u);
  EXPECT_EQ(d.train[1].label, 1u);
}

TEST(LoadDataset, SingleFileBecomesTrain) {
  const auto dir = scratch("single");
  write_file(dir / "all.jsonl", "{\"text\": \"a\", \"label\": 0}\n{\"text\": \"b\", \"label\": 1}\n");
  const auto d = load_dataset(dir / "all.jsonl");
  EXPECT_EQ(d.train.size(), 2u);
  EXPECT_EQ(d.label_names, (std::vector<std::string>{"0", "1"}));
}

TEST(LoadDataset, Errors) {
  const auto dir = scratch("errors");
  write_file(dir / "bad.jsonl", "{\"text\": \"a\", \"label\": 0}\nnot json\n");
  expect_kind(ErrorKind::kParse, [&] { load_dataset(dir / "bad.jsonl"); });
  write_file(dir / "dup.jsonl",
             "{\"text\": \"a\", \"label\": 0, \"id\": 1}\n{\"text\": \"b\", \"label\": 1, \"id\": 1}\n");
  expect_kind(ErrorKind::kSchema, [&] { load_dataset(dir / "dup.jsonl"); });
  write_file(dir / "empty_text.jsonl", "{\"text\": \"\", \"label\": 0}\n{\"text\": \"b\", \"label\": 1}\n");
  expect_kind(ErrorKind::kSchema, [&] { load_dataset(dir / "empty_text.jsonl"); });
  write_file(dir / "mixed.jsonl", "{\"text\": \"a\", \"label\": 0}\n{\"text\": \"b\", \"label\": \"x\"}\n");
  expect_kind(ErrorKind::kSchema, [&] { load_dataset(dir / "mixed.jsonl"); });
  expect_kind(ErrorKind::kIo, [&] { load_dataset(dir / "missing_dir"); });
}

TEST(SaveDataset, RoundTrip) {
  SyntheticOptions o;
  o.train = 30;
  o.dev = 9;
  o.test = 12;
  const auto d = make_synthetic_dataset(o);
  const auto dir = scratch("roundtrip");
  save_dataset(dir, d);
  auto back = load_dataset(dir);
  back.name = d.name;
  EXPECT_EQ(back, d);
}

TEST(Repository, AlignmentAndNormalization) {
  const auto dir = scratch("repo");
  write_lines(dir / "s.txt", {"first", "second"});
  write_embeddings_text(dir / "e.txt", EmbeddingMatrix(2, {3.0F, 4.0F, 0.0F, 2.0F}));
  const auto repo = load_repository(dir / "s.txt", dir / "e.txt");
  EXPECT_EQ(repo.size(), 2u);
  EXPECT_NEAR(repo.embeddings.row(0)[0], 0.6F, 1e-6);
  EXPECT_NEAR(repo.embeddings.row(1)[1], 1.0F, 1e-6);
  write_lines(dir / "three.txt", {"a", "b", "c"});
  expect_kind(ErrorKind::kAlignment, [&] { load_repository(dir / "three.txt", dir / "e.txt"); });
}

TEST(Synthetic, DeterministicAndBalanced) {
  SyntheticOptions o;
  o.train = 60;
  o.dev = 30;
  o.test = 30;
  const auto a = make_synthetic_dataset(o);
  EXPECT_EQ(a, make_synthetic_dataset(o));
  std::vector<std::size_t> counts(a.num_classes(), 0);
  for (const auto& ex : a.train) ++counts[ex.label];
  for (auto c : counts) EXPECT_EQ(c, 20u);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(make_synthetic_repository(o).size(), o.repository);
}
