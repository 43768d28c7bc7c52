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

#include "ipqgr/rehearsal.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace ipqgr {

void CodeIndex::add(DocId doc, const PqCode& code) {
  index_[code].push_back(doc);
  ++num_docs_;
}

std::span<const DocId> CodeIndex::lookup(const PqCode& code) const {
  auto it = index_.find(code);
  if (it == index_.end()) return {};
  return it->second;
}

std::string MemoryEntry::to_record() const {
  return std::to_string(old_doc) + '\t' + std::to_string(source_doc) + '\t' + std::to_string(changed_dims);
}

std::vector<DocId> MemoryBank::distinct_docs() const {
  std::set<DocId> s;
  for (const auto& e : entries) s.insert(e.old_doc);
  return {s.begin(), s.end()};
}

std::size_t max_perturbed_dims(std::size_t num_groups) { return std::max<std::size_t>(1, num_groups / 6); }

std::vector<PqCode> perturb_codes(const PqCode& code, std::size_t changed_dims, std::size_t repeats,
                                  const Codebook& cb, RandomSource& rng) {
  const std::size_t m_total = cb.num_groups();
  if (code.size() != m_total) throw std::invalid_argument("perturb_codes: code length does not match codebook");
  if (changed_dims < 1 || changed_dims > m_total) {
    throw std::invalid_argument("perturb_codes: o=" + std::to_string(changed_dims) + " outside [1, " +
                                std::to_string(m_total) + "]");
  }
  if (repeats < 1) throw std::invalid_argument("perturb_codes: c must be at least 1");
  if (!cb.valid(code)) throw std::invalid_argument("perturb_codes: code not valid for codebook");

  std::vector<std::size_t> selectable;
  for (std::size_t m = 0; m < m_total; ++m) {
    if (cb.group(m).size() >= 2) selectable.push_back(m);
  }
  std::vector<PqCode> out;
  if (selectable.size() < changed_dims) return out;

  std::set<PqCode> seen;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    std::vector<std::size_t> dims = selectable;
    for (std::size_t i = 0; i < changed_dims; ++i) {
      std::swap(dims[i], dims[i + rng.uniform_index(dims.size() - i)]);
    }
    PqCode next = code;
    for (std::size_t i = 0; i < changed_dims; ++i) {
      const std::size_t m = dims[i];
      // Uniform over the K_m - 1 other centroids.
      auto pick = static_cast<std::uint32_t>(rng.uniform_index(cb.group(m).size() - 1));
      if (pick >= code[m]) ++pick;
      next.indices[m] = pick;
    }
    if (seen.insert(next).second) out.push_back(std::move(next));
  }
  return out;
}

MemoryBank build_memory_bank(std::span<const std::pair<DocId, PqCode>> new_codes, const CodeIndex& index,
                             std::size_t repeats, const Codebook& cb, std::uint64_t seed, std::uint32_t session) {
  MemoryBank bank;
  bank.session = session;
  if (index.empty()) return bank;
  const std::size_t o_max = std::min(max_perturbed_dims(cb.num_groups()), cb.num_groups());
  for (const auto& [doc, code] : new_codes) {
    RandomSource rng(RandomSource::derive_seed(seed, doc));
    std::set<DocId> found;
    for (std::size_t o = 1; o <= o_max; ++o) {
      for (const PqCode& near : perturb_codes(code, o, repeats, cb, rng)) {
        for (DocId old : index.lookup(near)) {
          if (found.insert(old).second) {
            bank.entries.push_back({old, doc, static_cast<std::uint32_t>(o)});
          }
        }
      }
    }
  }
  return bank;
}

std::vector<PseudoQueryPair> generate_pseudo_queries(DocId doc, const Vector& embedding, const PqCode& code,
                                                     std::size_t count, double sigma, RandomSource& rng) {
  if (sigma < 0.0) throw std::invalid_argument("generate_pseudo_queries: negative sigma");
  std::vector<PseudoQueryPair> out;
  out.reserve(count);
  for (std::size_t q = 0; q < count; ++q) {
    Vector v = embedding;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += sigma * rng.normal();
    out.push_back({std::move(v), doc, code});
  }
  return out;
}

}  // namespace ipqgr
