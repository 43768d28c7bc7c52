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

#include "ipqgr/codebook.hpp"

#include <stdexcept>

#include "ipqgr/errors.hpp"
#include "ipqgr/io.hpp"

namespace ipqgr {

std::string PqCode::to_string() const {
  std::string s;
  for (std::size_t m = 0; m < indices.size(); ++m) {
    if (m) s += ' ';
    s += std::to_string(indices[m]);
  }
  return s;
}

std::size_t hamming_distance(const PqCode& a, const PqCode& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t m = 0; m < a.size(); ++m) d += a[m] != b[m];
  return d;
}

void Cluster::add_member(DocId id, const Vector& sub) {
  members.push_back(id);
  member_vectors.push_back(sub);
  member_dists.push_back(euclidean_dist(sub, centroid));
}

void Cluster::refresh_distances() {
  member_dists.resize(member_vectors.size());
  for (std::size_t j = 0; j < member_vectors.size(); ++j) {
    member_dists[j] = euclidean_dist(member_vectors[j], centroid);
  }
}

Vector Cluster::member_mean() const {
  if (member_vectors.empty()) throw InvalidStateError("member_mean: empty cluster");
  Vector s = Vector::Zero(centroid.size());
  for (const auto& v : member_vectors) s += v;
  return s / static_cast<double>(member_vectors.size());
}

std::pair<std::size_t, double> SubCodebook::nearest(const Vector& sub) const {
  if (clusters.empty()) throw InvalidStateError("nearest: empty sub-codebook");
  std::size_t best = 0;
  double best_d = squared_dist(sub, clusters[0].centroid);
  for (std::size_t k = 1; k < clusters.size(); ++k) {
    const double d = squared_dist(sub, clusters[k].centroid);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {best, best_d};
}

Codebook::Codebook(std::size_t dim, std::size_t num_groups) : dim_(dim), groups_(num_groups) {
  if (num_groups == 0) throw std::invalid_argument("Codebook: M must be at least 1");
  if (dim % num_groups != 0) {
    throw std::invalid_argument("Codebook: D=" + std::to_string(dim) + " not divisible by M=" +
                                std::to_string(num_groups));
  }
}

std::vector<std::size_t> Codebook::group_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& g : groups_) out.push_back(g.size());
  return out;
}

std::size_t Codebook::total_centroids() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.size();
  return n;
}

bool Codebook::valid(const PqCode& code) const {
  if (code.size() != groups_.size()) return false;
  for (std::size_t m = 0; m < code.size(); ++m) {
    if (code[m] >= groups_[m].size()) return false;
  }
  return true;
}

void Codebook::serialize(BinaryWriter& w) const {
  w.u64(dim_);
  w.u32(session_);
  w.u64(groups_.size());
  for (const auto& g : groups_) {
    w.u64(g.clusters.size());
    for (const auto& c : g.clusters) {
      w.vec(c.centroid);
      w.u64(c.members.size());
      for (std::size_t j = 0; j < c.members.size(); ++j) {
        w.u64(c.members[j]);
        w.vec(c.member_vectors[j]);
        w.f64(c.member_dists[j]);
      }
    }
  }
}

Codebook Codebook::deserialize(BinaryReader& r) {
  Codebook cb;
  cb.dim_ = r.u64();
  cb.session_ = r.u32();
  const std::uint64_t m = r.u64();
  if (m == 0 || cb.dim_ % m != 0) throw FormatError("codebook: bad group count", r.pos());
  cb.groups_.resize(m);
  for (auto& g : cb.groups_) {
    g.clusters.resize(r.u64());
    for (auto& c : g.clusters) {
      c.centroid = r.vec();
      const std::uint64_t n = r.u64();
      for (std::uint64_t j = 0; j < n; ++j) {
        c.members.push_back(r.u64());
        c.member_vectors.push_back(r.vec());
        c.member_dists.push_back(r.f64());
      }
    }
  }
  return cb;
}

bool Codebook::operator==(const Codebook& o) const {
  if (dim_ != o.dim_ || session_ != o.session_ || groups_.size() != o.groups_.size()) return false;
  for (std::size_t m = 0; m < groups_.size(); ++m) {
    const auto& a = groups_[m].clusters;
    const auto& b = o.groups_[m].clusters;
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].centroid != b[k].centroid || a[k].members != b[k].members ||
          a[k].member_vectors != b[k].member_vectors || a[k].member_dists != b[k].member_dists) {
        return false;
      }
    }
  }
  return true;
}

std::vector<Vector> split_groups(const Vector& x, std::size_t num_groups) {
  if (num_groups == 0) throw std::invalid_argument("split_groups: M must be at least 1");
  const auto dim = static_cast<std::size_t>(x.size());
  if (dim % num_groups != 0) {
    throw std::invalid_argument("split_groups: D=" + std::to_string(dim) + " not divisible by M=" +
                                std::to_string(num_groups));
  }
  const auto sub = static_cast<Eigen::Index>(dim / num_groups);
  std::vector<Vector> out;
  out.reserve(num_groups);
  for (std::size_t m = 0; m < num_groups; ++m) {
    out.emplace_back(x.segment(static_cast<Eigen::Index>(m) * sub, sub));
  }
  return out;
}

BaseCodebook build_base_codebook(std::span<const Vector> embeddings, std::size_t num_groups, std::size_t k,
                                 RandomSource& rng, std::span<const DocId> ids, std::size_t max_iters) {
  if (embeddings.empty()) throw std::invalid_argument("build_base_codebook: no documents");
  if (embeddings.size() < k) {
    throw std::invalid_argument("build_base_codebook: " + std::to_string(embeddings.size()) +
                                " documents for K=" + std::to_string(k));
  }
  if (!ids.empty() && ids.size() != embeddings.size()) {
    throw std::invalid_argument("build_base_codebook: id count does not match embeddings");
  }
  const std::size_t dim = static_cast<std::size_t>(embeddings[0].size());
  BaseCodebook out{Codebook(dim, num_groups), std::vector<PqCode>(embeddings.size())};
  for (auto& c : out.codes) c.indices.resize(num_groups);

  std::vector<std::vector<Vector>> subs(num_groups);
  for (const Vector& e : embeddings) {
    if (static_cast<std::size_t>(e.size()) != dim) {
      throw std::invalid_argument("build_base_codebook: inconsistent embedding dimensions");
    }
    auto parts = split_groups(e, num_groups);
    for (std::size_t m = 0; m < num_groups; ++m) subs[m].push_back(std::move(parts[m]));
  }

  for (std::size_t m = 0; m < num_groups; ++m) {
    KMeansResult km = kmeans(subs[m], k, rng, max_iters);
    SubCodebook& g = out.codebook.group(m);
    g.clusters.resize(k);
    for (std::size_t c = 0; c < k; ++c) g.clusters[c].centroid = km.centroids[c];
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
      const std::size_t a = km.assignments[i];
      g.clusters[a].add_member(ids.empty() ? DocId{i} : ids[i], subs[m][i]);
      out.codes[i].indices[m] = static_cast<std::uint32_t>(a);
    }
  }
  out.codebook.set_session(0);
  return out;
}

PqCode quantize(const Vector& x, const Codebook& cb) {
  if (static_cast<std::size_t>(x.size()) != cb.dim()) {
    throw std::invalid_argument("quantize: dimension " + std::to_string(x.size()) + " != codebook D " +
                                std::to_string(cb.dim()));
  }
  PqCode code;
  const auto sub = static_cast<Eigen::Index>(cb.sub_dim());
  for (std::size_t m = 0; m < cb.num_groups(); ++m) {
    const Vector part = x.segment(static_cast<Eigen::Index>(m) * sub, sub);
    code.indices.push_back(static_cast<std::uint32_t>(cb.group(m).nearest(part).first));
  }
  return code;
}

Vector reconstruct(const PqCode& code, const Codebook& cb) {
  if (!cb.valid(code)) throw std::invalid_argument("reconstruct: code [" + code.to_string() + "] out of range");
  Vector out(static_cast<Eigen::Index>(cb.dim()));
  const auto sub = static_cast<Eigen::Index>(cb.sub_dim());
  for (std::size_t m = 0; m < code.size(); ++m) {
    out.segment(static_cast<Eigen::Index>(m) * sub, sub) = cb.group(m).clusters[code[m]].centroid;
  }
  return out;
}

double quantization_error(const Vector& x, const Codebook& cb) {
  return squared_dist(x, reconstruct(quantize(x, cb), cb));
}

}  // namespace ipqgr
