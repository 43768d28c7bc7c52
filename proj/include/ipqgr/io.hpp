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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipqgr/repr_learner.hpp"
#include "ipqgr/vector_core.hpp"

namespace ipqgr {

/// Little-endian byte sink.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view b) { buf_.append(b); }
  /// Length-prefixed (u64) string.
  void str(std::string_view s);
  void vec(const Vector& v);
  void mat(const Matrix& m);

  const std::string& data() const noexcept { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Little-endian byte source. Every read past the end throws FormatError
/// carrying the offset of the failed read.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);
  std::string str();
  Vector vec();
  Matrix mat();

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

// EMB1: "EMB1", u32 count, u32 dim, count*dim float32, row-major, little-endian.
std::string encode_embeddings(std::span<const Vector> rows);
std::vector<Vector> decode_embeddings(std::string_view bytes);
std::vector<Vector> load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, std::span<const Vector> rows);

// TOK1: "TOK1", u32 count, u32 token dim, then per document u32 length
// followed by length*dim float32.
std::string encode_tokens(std::span<const TokenDocument> docs);
std::vector<TokenDocument> decode_tokens(std::string_view bytes);
std::vector<TokenDocument> load_tokens(const std::string& path);
void save_tokens(const std::string& path, std::span<const TokenDocument> docs);

}  // namespace ipqgr
