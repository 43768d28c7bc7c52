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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ipqgr/rehearsal.hpp"
#include "test_util.hpp"

namespace ipqgr {
namespace {

// M groups of dimension 1 with K centroids at 0, 1, ..., K-1.
Codebook grid_codebook(std::size_t m_groups, std::size_t k) {
  Codebook cb(m_groups, m_groups);
  for (std::size_t m = 0; m < m_groups; ++m) {
    for (std::size_t j = 0; j < k; ++j) {
      Cluster c;
      c.centroid = Vector{{static_cast<double>(j)}};
      cb.group(m).clusters.push_back(c);
    }
  }
  return cb;
}

PqCode random_code(std::size_t m_groups, std::size_t k, RandomSource& rng) {
  PqCode c;
  for (std::size_t m = 0; m < m_groups; ++m) c.indices.push_back(static_cast<std::uint32_t>(rng.uniform_index(k)));
  return c;
}

TEST(MaxPerturbedDims, FloorWithMinimumOne) {
  EXPECT_EQ(max_perturbed_dims(4), 1u);
  EXPECT_EQ(max_perturbed_dims(6), 1u);
  EXPECT_EQ(max_perturbed_dims(13), 2u);
  EXPECT_EQ(max_perturbed_dims(24), 4u);
}

TEST(PerturbCodes, SaturatesToAllSingleFlips) {
  const Codebook cb = grid_codebook(4, 2);
  RandomSource rng(1);
  const PqCode code{{0, 1, 0, 1}};
  const auto out = perturb_codes(code, 1, 500, cb, rng);
  std::set<PqCode> got(out.begin(), out.end());
  std::set<PqCode> expect;
  for (std::size_t m = 0; m < 4; ++m) {
    PqCode n = code;
    n.indices[m] ^= 1u;
    expect.insert(n);
  }
  EXPECT_EQ(got, expect);
  EXPECT_EQ(got.size(), out.size());
}

TEST(PerturbCodes, FullFlip) {
  const Codebook cb = grid_codebook(2, 2);
  RandomSource rng(2);
  const auto out = perturb_codes(PqCode{{0, 0}}, 2, 20, cb, rng);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (PqCode{{1, 1}}));
}

TEST(PerturbCodes, ExactHammingDistanceAndValid) {
  const Codebook cb = grid_codebook(6, 5);
  RandomSource rng(3);
  for (int t = 0; t < 200; ++t) {
    const PqCode code = random_code(6, 5, rng);
    const std::size_t o = 1 + rng.uniform_index(6);
    const auto out = perturb_codes(code, o, 10, cb, rng);
    EXPECT_FALSE(out.empty());
    EXPECT_LE(out.size(), 10u);
    for (const PqCode& p : out) {
      EXPECT_EQ(hamming_distance(p, code), o);
      EXPECT_TRUE(cb.valid(p));
      EXPECT_NE(p, code);
    }
  }
}

TEST(PerturbCodes, SingleCentroidGroupsAreSkipped) {
  Codebook cb = grid_codebook(3, 3);
  cb.group(1).clusters.resize(1);
  RandomSource rng(4);
  for (const PqCode& p : perturb_codes(PqCode{{0, 0, 0}}, 2, 50, cb, rng)) EXPECT_EQ(p[1], 0u);
  EXPECT_TRUE(perturb_codes(PqCode{{0, 0, 0}}, 3, 50, cb, rng).empty());
}

TEST(PerturbCodes, BadArguments) {
  const Codebook cb = grid_codebook(2, 2);
  RandomSource rng(5);
  EXPECT_THROW(perturb_codes(PqCode{{0, 0}}, 3, 1, cb, rng), std::invalid_argument);
  EXPECT_THROW(perturb_codes(PqCode{{0, 0}}, 0, 1, cb, rng), std::invalid_argument);
}

TEST(MemoryBank, EmptyIndexGivesEmptyBank) {
  const Codebook cb = grid_codebook(4, 2);
  const std::vector<std::pair<DocId, PqCode>> fresh = {{10, PqCode{{0, 0, 0, 0}}}};
  EXPECT_TRUE(build_memory_bank(fresh, CodeIndex{}, 10, cb, 1, 1).entries.empty());
}

TEST(MemoryBank, SubsetOfHammingNeighboursAndSaturates) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomSource rng(seed);
    const Codebook cb = grid_codebook(4, 2);
    CodeIndex index;
    std::vector<std::pair<DocId, PqCode>> old_docs, fresh;
    for (DocId d = 0; d < 8; ++d) {
      old_docs.emplace_back(d, random_code(4, 2, rng));
      index.add(d, old_docs.back().second);
    }
    for (DocId d = 8; d < 11; ++d) fresh.emplace_back(d, random_code(4, 2, rng));

    std::set<DocId> neighbours;
    for (const auto& [nd, nc] : fresh)
      for (const auto& [od, oc] : old_docs) {
        const std::size_t h = hamming_distance(nc, oc);
        if (h >= 1 && h <= max_perturbed_dims(4)) neighbours.insert(od);
      }

    const MemoryBank small = build_memory_bank(fresh, index, 2, cb, seed, 1);
    for (DocId d : small.distinct_docs()) EXPECT_TRUE(neighbours.count(d));
    const MemoryBank full = build_memory_bank(fresh, index, 200, cb, seed, 1);
    const auto got = full.distinct_docs();
    EXPECT_EQ(std::set<DocId>(got.begin(), got.end()), neighbours);
    for (const auto& e : full.entries) {
      EXPECT_LT(e.old_doc, 8u);
      EXPECT_EQ(e.changed_dims, 1u);
    }
  }
}

TEST(MemoryBank, OrderIndependent) {
  RandomSource rng(6);
  const Codebook cb = grid_codebook(12, 3);
  CodeIndex index;
  for (DocId d = 0; d < 200; ++d) index.add(d, random_code(12, 3, rng));
  std::vector<std::pair<DocId, PqCode>> fresh;
  for (DocId d = 200; d < 220; ++d) fresh.emplace_back(d, random_code(12, 3, rng));
  auto reversed = fresh;
  std::reverse(reversed.begin(), reversed.end());
  const MemoryBank a = build_memory_bank(fresh, index, 10, cb, 77, 1);
  const MemoryBank b = build_memory_bank(reversed, index, 10, cb, 77, 1);
  auto key = [](const MemoryBank& bank) {
    std::set<std::tuple<DocId, DocId, std::uint32_t>> s;
    for (const auto& e : bank.entries) s.emplace(e.old_doc, e.source_doc, e.changed_dims);
    return s;
  };
  EXPECT_EQ(key(a), key(b));
  for (const auto& e : a.entries) EXPECT_LE(e.changed_dims, 2u);
}

TEST(PseudoQueries, NoiselessCopies) {
  RandomSource rng(7);
  const Vector e = testing::random_vector(8, rng);
  const auto qs = generate_pseudo_queries(3, e, PqCode{{1, 2}}, 3, 0.0, rng);
  ASSERT_EQ(qs.size(), 3u);
  for (const auto& q : qs) {
    EXPECT_EQ(q.query, e);
    EXPECT_EQ(q.target, 3u);
    EXPECT_EQ(q.target_code, (PqCode{{1, 2}}));
  }
}

TEST(PseudoQueries, NoiseStandardDeviation) {
  RandomSource rng(8);
  const Vector e = Vector::Zero(8);
  const auto qs = generate_pseudo_queries(0, e, PqCode{{0}}, 10000, 0.1, rng);
  for (Eigen::Index c = 0; c < 8; ++c) {
    double s = 0.0, s2 = 0.0;
    for (const auto& q : qs) {
      s += q.query[c];
      s2 += q.query[c] * q.query[c];
    }
    const double mean = s / 10000.0;
    const double sd = std::sqrt(s2 / 10000.0 - mean * mean);
    EXPECT_GE(sd, 0.095);
    EXPECT_LE(sd, 0.105);
  }
  EXPECT_THROW(generate_pseudo_queries(0, e, PqCode{{0}}, 1, -1.0, rng), std::invalid_argument);
}

TEST(CodeIndex, LookupAndRecords) {
  CodeIndex idx;
  idx.add(5, PqCode{{1, 1}});
  idx.add(2, PqCode{{1, 1}});
  const auto hits = idx.lookup(PqCode{{1, 1}});
  EXPECT_EQ(std::vector<DocId>(hits.begin(), hits.end()), (std::vector<DocId>{5, 2}));
  EXPECT_TRUE(idx.lookup(PqCode{{0, 0}}).empty());
  EXPECT_EQ((MemoryEntry{4, 9, 1}).to_record(), "4\t9\t1");
}

}  // namespace
}  // namespace ipqgr
