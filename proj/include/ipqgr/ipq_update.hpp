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
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipqgr/codebook.hpp"

namespace ipqgr {

/// Adaptive thresholds of one cluster: ad is the mean member distance to the
/// centroid, md the maximum member distance plus a U(0, ad) slack.
struct Thresholds {
  double ad = 0.0;
  double md = 0.0;
};

enum class UpdateKind : std::uint8_t { Unchanged, Changed, AddedNew };

const char* to_string(UpdateKind kind);

/// Which of the three update kinds an ingest may use.
///   none     fixed codebook; every sub-vector is Unchanged
///   ad_only  Unchanged below ad, Changed otherwise (no new centroids)
///   md_only  Changed up to md, AddedNew above it
///   both     full three-way rule
enum class ThresholdMode : std::uint8_t { None, AdOnly, MdOnly, Both };

const char* to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(const std::string& s);

struct UpdateDecision {
  std::uint32_t session = 0;
  DocId doc = 0;
  std::uint32_t group = 0;
  std::uint32_t cluster = 0;
  UpdateKind kind = UpdateKind::Unchanged;
  double dist = 0.0;
  Thresholds thresholds;

  /// Tab-separated "session doc group cluster kind dist ad md".
  std::string to_record() const;
};

/// Throws InvalidStateError on an empty cluster.
Thresholds compute_thresholds(const Cluster& cluster, RandomSource& rng);

/// dist < ad -> Unchanged; ad <= dist <= md -> Changed; dist > md -> AddedNew.
/// ad = md = dist = 0 lands in Changed through the inclusive middle band.
UpdateKind classify(double dist, const Thresholds& th);

/// The three-way rule restricted to the kinds `mode` permits.
UpdateKind classify(double dist, const Thresholds& th, ThresholdMode mode);

struct IngestResult {
  /// Code of each new document, in input order.
  std::vector<std::pair<DocId, PqCode>> codes;
  std::vector<UpdateDecision> log;
};

/// Incrementally indexes one session of new documents into `cb`, which is
/// updated in place and stamped with `target_session`.
///
/// Documents are processed in input order and groups in index order. For each
/// sub-vector the nearest centroid is found against the live codebook, the
/// thresholds of that cluster are computed, and the decision is applied
/// before the next sub-vector is seen. Existing centroid indices are never
/// removed or renumbered, so previously issued codes stay valid.
IngestResult ingest_session(Codebook& cb, std::span<const std::pair<DocId, Vector>> new_docs,
                            std::uint32_t target_session, RandomSource& rng,
                            ThresholdMode mode = ThresholdMode::Both);

}  // namespace ipqgr
