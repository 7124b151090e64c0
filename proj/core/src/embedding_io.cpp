// SPDX-License-Identifier: Apache-2.0
#include "mmknn/embedding_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "binary_io.hpp"

namespace mmknn {
namespace {

constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};

EmbeddingMatrix read_binary(std::istream& in, const std::filesystem::path& path) {
  const std::uint32_t rows = detail::read_u32(in);
  const std::uint32_t dim = detail::read_u32(in);
  if (dim == 0 && rows > 0) throw Error(ErrorKind::kFormat, path.string() + ": zero dimension");
  std::vector<float> data(static_cast<std::size_t>(rows) * dim);
  for (float& x : data) x = detail::read_f32(in);
  if (!in) throw Error(ErrorKind::kFormat, path.string() + ": truncated embedding body");
  if (dim == 0) return EmbeddingMatrix();
  return EmbeddingMatrix(dim, std::move(data));
}

EmbeddingMatrix read_text(std::istream& in, const std::filesystem::path& path) {
  EmbeddingMatrix out;
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> row;
  while (std::getline(in, line)) {
    ++line_no;
    row.clear();
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p == end) break;
      float value = 0.0f;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) {
        throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                            ": unparsable number");
      }
      row.push_back(value);
      p = next;
    }
    if (row.empty()) continue;
    try {
      out.append_row(row);
    } catch (const Error&) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": row width differs from earlier rows");
    }
  }
  return out;
}

}  // namespace

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::array<char, 4> head{};
  in.read(head.data(), head.size());
  if (in.gcount() == 4 && head == kMagic) return read_binary(in, path);
  in.clear();
  in.seekg(0);
  return read_text(in, path);
}

void write_embeddings_binary(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  detail::write_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (float x : m.data()) detail::write_f32(out, x);
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

void write_embeddings_text(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ' ';
      out << row[i];
    }
    out << '\n';
  }
}

}  // namespace mmknn
