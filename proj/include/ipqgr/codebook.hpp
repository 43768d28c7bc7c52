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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipqgr/vector_core.hpp"

namespace ipqgr {

class BinaryWriter;
class BinaryReader;

using DocId = std::uint64_t;

/// A document identifier: one zero-based centroid index per group.
struct PqCode {
  std::vector<std::uint32_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  std::uint32_t operator[](std::size_t m) const { return indices[m]; }

  auto operator<=>(const PqCode&) const = default;
  bool operator==(const PqCode&) const = default;

  /// Space-separated indices, e.g. "3 0 7".
  std::string to_string() const;
};

std::size_t hamming_distance(const PqCode& a, const PqCode& b);

/// One centroid together with its member sub-vectors. Member distances to
/// the centroid are kept in sync with the centroid value so that threshold
/// computation never rescans the member vectors.
struct Cluster {
  Vector centroid;
  std::vector<DocId> members;
  std::vector<Vector> member_vectors;
  std::vector<double> member_dists;

  std::size_t size() const noexcept { return members.size(); }
  void add_member(DocId id, const Vector& sub);
  void refresh_distances();
  Vector member_mean() const;
};

struct SubCodebook {
  std::vector<Cluster> clusters;

  std::size_t size() const noexcept { return clusters.size(); }
  /// Nearest centroid (squared distance, ties to lowest index).
  std::pair<std::size_t, double> nearest(const Vector& sub) const;
};

class Codebook {
 public:
  Codebook() = default;
  Codebook(std::size_t dim, std::size_t num_groups);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_groups() const noexcept { return groups_.size(); }
  std::size_t sub_dim() const noexcept { return groups_.empty() ? 0 : dim_ / groups_.size(); }
  std::uint32_t session() const noexcept { return session_; }
  void set_session(std::uint32_t t) noexcept { session_ = t; }

  const SubCodebook& group(std::size_t m) const { return groups_.at(m); }
  SubCodebook& group(std::size_t m) { return groups_.at(m); }

  /// K_m for every group.
  std::vector<std::size_t> group_sizes() const;
  std::size_t total_centroids() const;
  bool valid(const PqCode& code) const;

  void serialize(BinaryWriter& w) const;
  static Codebook deserialize(BinaryReader& r);

  bool operator==(const Codebook& other) const;

 private:
  std::size_t dim_ = 0;
  std::uint32_t session_ = 0;
  std::vector<SubCodebook> groups_;
};

/// Splits x into M contiguous sub-vectors of dimension D/M.
std::vector<Vector> split_groups(const Vector& x, std::size_t num_groups);

struct BaseCodebook {
  Codebook codebook;
  /// Codes of the input documents, in input order.
  std::vector<PqCode> codes;
};

/// Runs k-means per group over the base documents and records memberships.
/// `ids` names each embedding in the membership sets; when empty, documents
/// are numbered 0..N-1.
BaseCodebook build_base_codebook(std::span<const Vector> embeddings, std::size_t num_groups,
                                 std::size_t k, RandomSource& rng, std::span<const DocId> ids = {},
                                 std::size_t max_iters = kDefaultKMeansIters);

PqCode quantize(const Vector& x, const Codebook& cb);
Vector reconstruct(const PqCode& code, const Codebook& cb);
/// ||x - reconstruct(quantize(x))||^2
double quantization_error(const Vector& x, const Codebook& cb);

}  // namespace ipqgr
