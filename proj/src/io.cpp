// Copyright 2026 The ipqgr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ipqgr/io.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ipqgr/errors.hpp"

namespace ipqgr {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  bytes(s);
}

void BinaryWriter::vec(const Vector& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void BinaryWriter::mat(const Matrix& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void BinaryReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw FormatError("truncated input: needed " + std::to_string(n) + " bytes, " +
                          std::to_string(remaining()) + " available",
                      pos_);
  }
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string_view BinaryReader::bytes(std::size_t n) {
  need(n);
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  return std::string(bytes(n));
}

Vector BinaryReader::vec() {
  const std::uint64_t n = u64();
  need(n * 8);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  return v;
}

Matrix BinaryReader::mat() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  need(rows * cols * 8);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

void expect_magic(BinaryReader& r, std::string_view magic) {
  if (r.remaining() < magic.size() || r.bytes(magic.size()) != magic) {
    throw FormatError("bad magic, expected \"" + std::string(magic) + "\"", 0);
  }
}

void expect_payload(const BinaryReader& r, std::uint64_t expected) {
  if (r.remaining() != expected) {
    throw FormatError("payload size mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(r.remaining()),
                      r.pos());
  }
}

}  // namespace

std::string encode_embeddings(std::span<const Vector> rows) {
  BinaryWriter w;
  w.bytes("EMB1");
  const std::uint32_t dim = rows.empty() ? 0 : static_cast<std::uint32_t>(rows[0].size());
  w.u32(static_cast<std::uint32_t>(rows.size()));
  w.u32(dim);
  for (const Vector& v : rows) {
    if (static_cast<std::uint32_t>(v.size()) != dim) {
      throw std::invalid_argument("encode_embeddings: ragged rows");
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(static_cast<float>(v[i]));
  }
  return w.take();
}

std::vector<Vector> decode_embeddings(std::string_view bytes) {
  BinaryReader r(bytes);
  expect_magic(r, "EMB1");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  expect_payload(r, std::uint64_t{count} * dim * 4);
  std::vector<Vector> rows(count, Vector(dim));
  for (auto& v : rows)
    for (std::uint32_t i = 0; i < dim; ++i) v[i] = r.f32();
  return rows;
}

std::vector<Vector> load_embeddings(const std::string& path) { return decode_embeddings(read_file(path)); }

void save_embeddings(const std::string& path, std::span<const Vector> rows) {
  write_file(path, encode_embeddings(rows));
}

std::string encode_tokens(std::span<const TokenDocument> docs) {
  BinaryWriter w;
  w.bytes("TOK1");
  const std::uint32_t dim = docs.empty() ? 0 : static_cast<std::uint32_t>(docs[0].tokens.cols());
  w.u32(static_cast<std::uint32_t>(docs.size()));
  w.u32(dim);
  for (const auto& d : docs) {
    if (static_cast<std::uint32_t>(d.tokens.cols()) != dim) {
      throw std::invalid_argument("encode_tokens: inconsistent token dimension");
    }
    w.u32(static_cast<std::uint32_t>(d.tokens.rows()));
    for (Eigen::Index t = 0; t < d.tokens.rows(); ++t)
      for (Eigen::Index c = 0; c < d.tokens.cols(); ++c) w.f32(static_cast<float>(d.tokens(t, c)));
  }
  return w.take();
}

std::vector<TokenDocument> decode_tokens(std::string_view bytes) {
  BinaryReader r(bytes);
  expect_magic(r, "TOK1");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  std::vector<TokenDocument> docs;
  docs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    const std::uint64_t want = std::uint64_t{len} * dim * 4;
    if (r.remaining() < want) {
      throw FormatError("truncated token document " + std::to_string(i) + ": expected " +
                            std::to_string(want) + " bytes, found " + std::to_string(r.remaining()),
                        r.pos());
    }
    TokenDocument d{Matrix(len, dim)};
    for (std::uint32_t t = 0; t < len; ++t)
      for (std::uint32_t c = 0; c < dim; ++c) d.tokens(t, c) = r.f32();
    docs.push_back(std::move(d));
  }
  if (!r.done()) throw FormatError("trailing bytes after token corpus", r.pos());
  return docs;
}

std::vector<TokenDocument> load_tokens(const std::string& path) { return decode_tokens(read_file(path)); }

void save_tokens(const std::string& path, std::span<const TokenDocument> docs) {
  write_file(path, encode_tokens(docs));
}

}  // namespace ipqgr
