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

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipqgr/codebook.hpp"

namespace ipqgr {

/// Code -> documents carrying it, in insertion order.
class CodeIndex {
 public:
  void add(DocId doc, const PqCode& code);
  /// Empty span for unknown codes.
  std::span<const DocId> lookup(const PqCode& code) const;
  std::size_t num_docs() const noexcept { return num_docs_; }
  std::size_t num_codes() const noexcept { return index_.size(); }
  bool empty() const noexcept { return num_docs_ == 0; }

  auto begin() const { return index_.begin(); }
  auto end() const { return index_.end(); }

 private:
  std::map<PqCode, std::vector<DocId>> index_;
  std::size_t num_docs_ = 0;
};

struct MemoryEntry {
  DocId old_doc = 0;
  DocId source_doc = 0;
  /// Number of code positions changed when the old document was found.
  std::uint32_t changed_dims = 0;

  std::string to_record() const;
};

struct MemoryBank {
  std::uint32_t session = 0;
  std::vector<MemoryEntry> entries;

  /// Distinct old documents, ascending.
  std::vector<DocId> distinct_docs() const;
};

/// max(1, floor(M / 6)).
std::size_t max_perturbed_dims(std::size_t num_groups);

/// Up to `repeats` distinct codes that differ from `code` in exactly
/// `changed_dims` positions, each changed position receiving a different
/// valid centroid. Groups with a single centroid cannot change; if fewer than
/// `changed_dims` groups can, the result is empty.
std::vector<PqCode> perturb_codes(const PqCode& code, std::size_t changed_dims, std::size_t repeats,
                                  const Codebook& cb, RandomSource& rng);

/// For every new document and o = 1..max_perturbed_dims(M): draws `repeats`
/// perturbed codes and adds each old document found under them. Each new
/// document draws from its own stream derived from (seed, doc id), so the
/// result does not depend on the order of `new_codes`. An old document found
/// at several o keeps the smallest.
MemoryBank build_memory_bank(std::span<const std::pair<DocId, PqCode>> new_codes, const CodeIndex& index,
                             std::size_t repeats, const Codebook& cb, std::uint64_t seed,
                             std::uint32_t session = 0);

struct PseudoQueryPair {
  Vector query;
  DocId target = 0;
  PqCode target_code;
};

/// Pseudo-queries as Gaussian perturbations of the document embedding.
std::vector<PseudoQueryPair> generate_pseudo_queries(DocId doc, const Vector& embedding, const PqCode& code,
                                                     std::size_t count, double sigma, RandomSource& rng);

}  // namespace ipqgr
