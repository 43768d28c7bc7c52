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

#include "ipqgr/ipq_update.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "ipqgr/errors.hpp"

namespace ipqgr {

const char* to_string(UpdateKind kind) {
  switch (kind) {
    case UpdateKind::Unchanged: return "unchanged";
    case UpdateKind::Changed: return "changed";
    case UpdateKind::AddedNew: return "added";
  }
  return "?";
}

const char* to_string(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::None: return "none";
    case ThresholdMode::AdOnly: return "ad_only";
    case ThresholdMode::MdOnly: return "md_only";
    case ThresholdMode::Both: return "both";
  }
  return "?";
}

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "none") return ThresholdMode::None;
  if (s == "ad_only") return ThresholdMode::AdOnly;
  if (s == "md_only") return ThresholdMode::MdOnly;
  if (s == "both") return ThresholdMode::Both;
  throw std::invalid_argument("unknown threshold mode: " + s);
}

std::string UpdateDecision::to_record() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%u\t%llu\t%u\t%u\t%s\t%.17g\t%.17g\t%.17g", session,
                static_cast<unsigned long long>(doc), group, cluster, to_string(kind), dist, thresholds.ad,
                thresholds.md);
  return buf;
}

Thresholds compute_thresholds(const Cluster& cluster, RandomSource& rng) {
  if (cluster.member_dists.empty()) throw InvalidStateError("compute_thresholds: empty cluster");
  double sum = 0.0;
  double max = 0.0;
  for (double d : cluster.member_dists) {
    sum += d;
    max = std::max(max, d);
  }
  Thresholds th;
  th.ad = sum / static_cast<double>(cluster.member_dists.size());
  th.md = max + rng.uniform(0.0, th.ad);
  // mean <= max always; the clamp only absorbs summation rounding.
  th.md = std::max(th.md, th.ad);
  return th;
}

UpdateKind classify(double dist, const Thresholds& th) {
  if (!(dist >= 0.0)) throw std::invalid_argument("classify: negative distance");
  if (dist < th.ad) return UpdateKind::Unchanged;
  if (dist <= th.md) return UpdateKind::Changed;
  return UpdateKind::AddedNew;
}

UpdateKind classify(double dist, const Thresholds& th, ThresholdMode mode) {
  const UpdateKind k = classify(dist, th);
  switch (mode) {
    case ThresholdMode::None: return UpdateKind::Unchanged;
    case ThresholdMode::AdOnly: return k == UpdateKind::Unchanged ? k : UpdateKind::Changed;
    case ThresholdMode::MdOnly: return k == UpdateKind::AddedNew ? k : UpdateKind::Changed;
    case ThresholdMode::Both: return k;
  }
  return k;
}

IngestResult ingest_session(Codebook& cb, std::span<const std::pair<DocId, Vector>> new_docs,
                            std::uint32_t target_session, RandomSource& rng, ThresholdMode mode) {
  if (cb.session() >= target_session) {
    throw InvalidStateError("ingest_session: codebook is at session " + std::to_string(cb.session()) +
                            ", cannot ingest session " + std::to_string(target_session));
  }
  for (const auto& [id, x] : new_docs) {
    if (static_cast<std::size_t>(x.size()) != cb.dim()) {
      throw std::invalid_argument("ingest_session: document " + std::to_string(id) + " has dimension " +
                                  std::to_string(x.size()) + ", codebook D is " + std::to_string(cb.dim()));
    }
    require_finite(x, "ingest_session");
  }

  IngestResult out;
  out.codes.reserve(new_docs.size());
  for (const auto& [id, x] : new_docs) {
    PqCode code;
    const auto parts = split_groups(x, cb.num_groups());
    for (std::size_t m = 0; m < cb.num_groups(); ++m) {
      SubCodebook& g = cb.group(m);
      const Vector& sub = parts[m];
      const std::size_t k = g.nearest(sub).first;
      Cluster& cluster = g.clusters[k];
      const double dist = euclidean_dist(sub, cluster.centroid);

      UpdateDecision d;
      d.session = target_session;
      d.doc = id;
      d.group = static_cast<std::uint32_t>(m);
      d.cluster = static_cast<std::uint32_t>(k);
      d.dist = dist;
      if (mode == ThresholdMode::None) {
        d.kind = UpdateKind::Unchanged;
      } else if (cluster.members.empty()) {
        // A k-means cluster that could not be repaired has no members; the
        // first sub-vector routed to it becomes its sole member.
        d.kind = UpdateKind::Changed;
      } else {
        d.thresholds = compute_thresholds(cluster, rng);
        d.kind = classify(dist, d.thresholds, mode);
      }

      switch (d.kind) {
        case UpdateKind::Unchanged:
          break;
        case UpdateKind::Changed: {
          cluster.members.push_back(id);
          cluster.member_vectors.push_back(sub);
          cluster.member_dists.push_back(0.0);
          const double n = static_cast<double>(cluster.members.size());
          cluster.centroid += (sub - cluster.centroid) / n;
          cluster.refresh_distances();
          break;
        }
        case UpdateKind::AddedNew: {
          Cluster fresh;
          fresh.centroid = sub;
          fresh.add_member(id, sub);
          g.clusters.push_back(std::move(fresh));
          d.cluster = static_cast<std::uint32_t>(g.clusters.size() - 1);
          break;
        }
      }
      code.indices.push_back(d.cluster);
      out.log.push_back(d);
    }
    out.codes.emplace_back(id, std::move(code));
  }
  cb.set_session(target_session);
  return out;
}

}  // namespace ipqgr
