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

#include <limits>
#include <stdexcept>

#include "ipqgr/codebook.hpp"
#include "ipqgr/io.hpp"
#include "test_util.hpp"

namespace ipqgr {
namespace {

using testing::random_vectors;

// Exhaustive per-group argmin, written independently of quantize().
PqCode scan_code(const Vector& x, const Codebook& cb) {
  PqCode code;
  const auto sd = static_cast<Eigen::Index>(cb.sub_dim());
  for (std::size_t m = 0; m < cb.num_groups(); ++m) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t k = 0; k < cb.group(m).size(); ++k) {
      double d = 0.0;
      for (Eigen::Index i = 0; i < sd; ++i) {
        const double diff = x[static_cast<Eigen::Index>(m) * sd + i] - cb.group(m).clusters[k].centroid[i];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = static_cast<std::uint32_t>(k);
      }
    }
    code.indices.push_back(arg);
  }
  return code;
}

TEST(SplitGroups, Slices) {
  const auto parts = split_groups(Vector{{1.0, 2.0, 3.0, 4.0}}, 2);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0], (Vector{{1.0, 2.0}}));
  EXPECT_EQ(parts[1], (Vector{{3.0, 4.0}}));
}

TEST(SplitGroups, SingleGroupIsIdentity) {
  const Vector x{{1.0, 2.0, 3.0}};
  const auto parts = split_groups(x, 1);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], x);
}

TEST(SplitGroups, WideEmbedding) {
  RandomSource rng(1);
  const Vector x = testing::random_vector(768, rng);
  const auto parts = split_groups(x, 24);
  ASSERT_EQ(parts.size(), 24u);
  Vector joined(768);
  for (std::size_t m = 0; m < 24; ++m) {
    ASSERT_EQ(parts[m].size(), 32);
    joined.segment(static_cast<Eigen::Index>(m) * 32, 32) = parts[m];
  }
  EXPECT_EQ(joined, x);
}

TEST(SplitGroups, NonDivisibleThrows) {
  EXPECT_THROW(split_groups(Vector::Zero(5), 2), std::invalid_argument);
}

TEST(BuildBaseCodebook, KEqualsNHasZeroError) {
  RandomSource rng(2);
  const auto docs = random_vectors(4, 4, rng);
  const auto base = build_base_codebook(docs, 2, 4, rng);
  EXPECT_EQ(base.codebook.group_sizes(), (std::vector<std::size_t>{4, 4}));
  EXPECT_EQ(base.codebook.session(), 0u);
  for (const Vector& d : docs) EXPECT_NEAR(quantization_error(d, base.codebook), 0.0, 1e-20);
}

TEST(BuildBaseCodebook, CodesAreExhaustiveArgmin) {
  RandomSource rng(3);
  const auto docs = random_vectors(64, 8, rng);
  const auto base = build_base_codebook(docs, 2, 4, rng);
  for (std::size_t i = 0; i < docs.size(); ++i) EXPECT_EQ(base.codes[i], scan_code(docs[i], base.codebook));
}

TEST(BuildBaseCodebook, MembershipsAreMeans) {
  RandomSource rng(4);
  const auto docs = random_vectors(40, 6, rng);
  const auto base = build_base_codebook(docs, 3, 4, rng);
  std::size_t members = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    for (const Cluster& c : base.codebook.group(m).clusters) {
      members += c.size();
      ASSERT_GT(c.size(), 0u);
      EXPECT_LT((c.centroid - c.member_mean()).norm(), 1e-6);
      for (std::size_t j = 0; j < c.size(); ++j) {
        EXPECT_NEAR(c.member_dists[j], euclidean_dist(c.member_vectors[j], c.centroid), 1e-12);
      }
    }
  }
  EXPECT_EQ(members, 3 * docs.size());
}

TEST(BuildBaseCodebook, IdenticalDocsShareCode) {
  RandomSource rng(5);
  auto docs = random_vectors(10, 4, rng);
  docs.push_back(docs[3]);
  const auto base = build_base_codebook(docs, 2, 3, rng);
  EXPECT_EQ(base.codes[3], base.codes[10]);
}

TEST(BuildBaseCodebook, TooFewDocsThrows) {
  RandomSource rng(6);
  const auto docs = random_vectors(3, 4, rng);
  EXPECT_THROW(build_base_codebook(docs, 2, 4, rng), std::invalid_argument);
}

TEST(Quantize, ExactCentroidInput) {
  RandomSource rng(7);
  const auto docs = random_vectors(20, 4, rng);
  const auto base = build_base_codebook(docs, 2, 4, rng);
  Vector x(4);
  x.head(2) = base.codebook.group(0).clusters[3].centroid;
  x.tail(2) = base.codebook.group(1).clusters[0].centroid;
  EXPECT_EQ(quantize(x, base.codebook), (PqCode{{3, 0}}));
  EXPECT_EQ(reconstruct(quantize(x, base.codebook), base.codebook), x);
}

TEST(Quantize, MatchesExhaustiveScan) {
  RandomSource rng(8);
  const auto base = build_base_codebook(random_vectors(50, 8, rng), 4, 5, rng);
  for (const Vector& x : random_vectors(200, 8, rng)) EXPECT_EQ(quantize(x, base.codebook), scan_code(x, base.codebook));
}

TEST(Quantize, TieBreaksToLowerIndex) {
  Codebook cb(1, 1);
  for (double v : {5.0, -1.0, 1.0}) {
    Cluster c;
    c.centroid = Vector{{v}};
    cb.group(0).clusters.push_back(c);
  }
  EXPECT_EQ(quantize(Vector{{0.0}}, cb), (PqCode{{1}}));
}

TEST(Quantize, DimensionMismatchThrows) {
  RandomSource rng(9);
  const auto base = build_base_codebook(random_vectors(10, 4, rng), 2, 2, rng);
  EXPECT_THROW(quantize(Vector::Zero(6), base.codebook), std::invalid_argument);
}

TEST(Reconstruct, ErrorIsSumOfGroupMinima) {
  RandomSource rng(10);
  const auto base = build_base_codebook(random_vectors(50, 6, rng), 3, 4, rng);
  for (const Vector& x : random_vectors(50, 6, rng)) {
    double expect = 0.0;
    const auto parts = split_groups(x, 3);
    for (std::size_t m = 0; m < 3; ++m) {
      double best = std::numeric_limits<double>::infinity();
      for (const Cluster& c : base.codebook.group(m).clusters) best = std::min(best, squared_dist(parts[m], c.centroid));
      expect += best;
    }
    EXPECT_NEAR(quantization_error(x, base.codebook), expect, 1e-12);
    // No other code reconstructs x better.
    const PqCode best_code = quantize(x, base.codebook);
    for (int t = 0; t < 10; ++t) {
      PqCode alt = best_code;
      alt.indices[rng.uniform_index(3)] = static_cast<std::uint32_t>(rng.uniform_index(4));
      EXPECT_GE(squared_dist(x, reconstruct(alt, base.codebook)) + 1e-12, expect);
    }
  }
}

TEST(Reconstruct, SingleCentroidCodebook) {
  RandomSource rng(11);
  const auto docs = random_vectors(5, 3, rng);
  const auto base = build_base_codebook(docs, 1, 1, rng);
  Vector mean = Vector::Zero(3);
  for (const Vector& d : docs) mean += d / 5.0;
  for (const Vector& d : docs) {
    const Vector r = reconstruct(quantize(d, base.codebook), base.codebook);
    EXPECT_LT((r - mean).norm(), 1e-12);
  }
}

TEST(Reconstruct, OutOfRangeThrows) {
  RandomSource rng(12);
  const auto base = build_base_codebook(random_vectors(10, 4, rng), 2, 2, rng);
  EXPECT_THROW(reconstruct(PqCode{{0, 2}}, base.codebook), std::invalid_argument);
  EXPECT_THROW(reconstruct(PqCode{{0}}, base.codebook), std::invalid_argument);
}

TEST(Codebook, SerializationRoundTrip) {
  RandomSource rng(13);
  auto base = build_base_codebook(random_vectors(30, 6, rng), 3, 4, rng);
  base.codebook.set_session(7);
  BinaryWriter w;
  base.codebook.serialize(w);
  BinaryReader r(w.data());
  const Codebook back = Codebook::deserialize(r);
  EXPECT_TRUE(r.done());
  EXPECT_TRUE(back == base.codebook);
  BinaryWriter w2;
  back.serialize(w2);
  EXPECT_EQ(w.data(), w2.data());
}

TEST(PqCode, HammingAndOrdering) {
  EXPECT_EQ(hamming_distance(PqCode{{1, 2, 3}}, PqCode{{1, 0, 4}}), 2u);
  EXPECT_LT(PqCode({{0, 5}}), PqCode({{1, 0}}));
  EXPECT_EQ(PqCode({{3, 0, 7}}).to_string(), "3 0 7");
}

}  // namespace
}  // namespace ipqgr
