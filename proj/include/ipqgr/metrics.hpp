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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ipqgr/codebook.hpp"

namespace ipqgr {

using QueryId = std::uint64_t;

struct Judgment {
  DocId doc = 0;
  std::uint32_t arrival_session = 0;
};

/// One relevant document per query, annotated with the session it arrived in.
using Qrels = std::map<QueryId, Judgment>;

/// Ranked document ids per query.
using RunResult = std::map<QueryId, std::vector<DocId>>;

struct MetricValue {
  double value = 0.0;
  std::size_t evaluated = 0;
  /// Queries present in the run but absent from qrels.
  std::size_t skipped = 0;
};

/// Mean over queries of 1/rank of the relevant document within the top N, 0
/// when it is missing. Queries without a judgment are skipped and counted.
MetricValue mrr_at(const RunResult& run, const Qrels& qrels, std::size_t n);
/// Fraction of queries whose relevant document is within the top N.
MetricValue hits_at(const RunResult& run, const Qrels& qrels, std::size_t n);

using Metric = std::function<MetricValue(const RunResult&, const Qrels&)>;

/// The metric over exactly those judged queries whose relevant document
/// arrived in sessions 0..session.
MetricValue vert(const RunResult& run, const Qrels& qrels, const Metric& g, std::uint32_t session);

/// R[t][i]: metric on query set i after training session t, for i <= t.
class SessionMatrix {
 public:
  explicit SessionMatrix(std::size_t sessions = 0);

  std::size_t sessions() const noexcept { return cells_.size(); }
  void set(std::size_t t, std::size_t i, double value);
  std::optional<double> get(std::size_t t, std::size_t i) const;
  bool complete() const;
  const std::vector<std::vector<std::optional<double>>>& rows() const noexcept { return cells_; }

 private:
  std::vector<std::vector<std::optional<double>>> cells_;
};

struct ContinualMetrics {
  double ap = 0.0;
  /// Absent with a single session.
  std::optional<double> bwt;
  std::optional<double> fwt;
};

/// With final session T:
///   AP  = mean_i R[T][i]
///   BWT = mean_{i<T} (R[i][i] - R[T][i])   (forgetting; lower is better)
///   FWT = mean_{i>=1} R[i][i]
ContinualMetrics continual_metrics(const SessionMatrix& r);

// Qrels TSV: query_id<TAB>doc_id<TAB>arrival_session.
Qrels parse_qrels(const std::string& text);
std::string format_qrels(const Qrels& qrels);
Qrels load_qrels(const std::string& path);

struct RunEntry {
  DocId doc = 0;
  double score = 0.0;
};
using ScoredRun = std::map<QueryId, std::vector<RunEntry>>;

// Run TSV: query_id<TAB>doc_id<TAB>rank<TAB>score, rank 1-based.
ScoredRun parse_run(const std::string& text);
std::string format_run(const ScoredRun& run);
RunResult ranked_ids(const ScoredRun& run);

}  // namespace ipqgr
