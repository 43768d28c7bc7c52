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

#include <zlib.h>

#include <stdexcept>

#include "ipqgr/errors.hpp"
#include "ipqgr/experiment.hpp"
#include "ipqgr/io.hpp"

namespace ipqgr {

DocidTrie EngineState::trie() const {
  DocidTrie t(codebook.num_groups());
  for (const auto& [doc, issued] : codes) t.insert(issued.code, doc);
  return t;
}

namespace {

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_state(const EngineState& s) {
  BinaryWriter p;
  p.str(config_to_json(s.config).dump());
  p.u32(s.session);
  s.codebook.serialize(p);
  p.u64(s.codes.size());
  for (const auto& [doc, issued] : s.codes) {
    p.u64(doc);
    p.u32(issued.session);
    p.u64(issued.code.size());
    for (auto k : issued.code.indices) p.u32(k);
  }
  s.decoder.serialize(p);
  p.u8(s.fisher ? 1 : 0);
  if (s.fisher) s.fisher->values.serialize(p);
  p.u8(s.projector ? 1 : 0);
  if (s.projector) {
    p.mat(s.projector->w1);
    p.vec(s.projector->b1);
    p.mat(s.projector->w2);
    p.vec(s.projector->b2);
  }
  p.str(s.progress.dump());

  BinaryWriter out;
  out.bytes("IPQS");
  out.u32(kStateVersion);
  out.u64(p.data().size());
  out.bytes(p.data());
  out.u32(crc32_of(p.data()));
  return out.take();
}

EngineState decode_state(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "IPQS") throw FormatError("engine state: bad magic", 0);
  const std::uint32_t version = r.u32();
  if (version > kStateVersion) {
    throw FormatError("engine state: version " + std::to_string(version) + " is newer than supported " +
                          std::to_string(kStateVersion),
                      4);
  }
  if (version == 0) throw FormatError("engine state: version 0", 4);
  const std::uint64_t size = r.u64();
  if (r.remaining() != size + 4) {
    throw FormatError("engine state: expected " + std::to_string(size + 4) + " bytes after header, found " +
                          std::to_string(r.remaining()),
                      r.pos());
  }
  const std::string_view payload = r.bytes(size);
  const std::uint32_t stored = r.u32();
  if (stored != crc32_of(payload)) throw CorruptionError("engine state: checksum mismatch");

  BinaryReader p(payload);
  EngineState s;
  try {
    s.config = config_from_json(nlohmann::json::parse(p.str()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("engine state: bad config: ") + e.what(), p.pos());
  }
  s.session = p.u32();
  s.codebook = Codebook::deserialize(p);
  const std::uint64_t n = p.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const DocId doc = p.u64();
    IssuedCode issued;
    issued.session = p.u32();
    const std::uint64_t len = p.u64();
    for (std::uint64_t m = 0; m < len; ++m) issued.code.indices.push_back(p.u32());
    if (!s.codebook.valid(issued.code)) throw FormatError("engine state: code invalid for codebook", p.pos());
    s.codes.emplace(doc, std::move(issued));
  }
  s.decoder = DecoderParams::deserialize(p);
  if (p.u8()) s.fisher = FisherDiag{DecoderParams::deserialize(p)};
  if (p.u8()) {
    ProjectorParams proj;
    proj.w1 = p.mat();
    proj.b1 = p.vec();
    proj.w2 = p.mat();
    proj.b2 = p.vec();
    s.projector = std::move(proj);
  }
  try {
    s.progress = nlohmann::json::parse(p.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("engine state: bad progress block: ") + e.what(), p.pos());
  }
  if (!p.done()) throw FormatError("engine state: trailing payload bytes", p.pos());
  if (s.decoder.group_sizes() != s.codebook.group_sizes()) {
    throw InvalidStateError("engine state: decoder rows do not match codebook sizes");
  }
  return s;
}

void save_state(const EngineState& state, const std::string& path) { write_file(path, encode_state(state)); }

EngineState load_state(const std::string& path) { return decode_state(read_file(path)); }

}  // namespace ipqgr
