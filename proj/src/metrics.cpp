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

#include "ipqgr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "ipqgr/errors.hpp"
#include "ipqgr/io.hpp"

namespace ipqgr {

namespace {

// 1-based rank of the relevant document, 0 when absent from the top n.
std::size_t rank_of(const std::vector<DocId>& ranking, DocId relevant, std::size_t n) {
  const std::size_t limit = std::min(n, ranking.size());
  for (std::size_t r = 0; r < limit; ++r) {
    if (ranking[r] == relevant) return r + 1;
  }
  return 0;
}

template <typename Gain>
MetricValue average(const RunResult& run, const Qrels& qrels, std::size_t n, Gain gain) {
  if (n == 0) throw std::invalid_argument("metric cutoff must be at least 1");
  MetricValue out;
  double sum = 0.0;
  for (const auto& [qid, ranking] : run) {
    auto it = qrels.find(qid);
    if (it == qrels.end()) {
      ++out.skipped;
      continue;
    }
    sum += gain(rank_of(ranking, it->second.doc, n));
    ++out.evaluated;
  }
  out.value = out.evaluated ? sum / static_cast<double>(out.evaluated) : 0.0;
  return out;
}

}  // namespace

MetricValue mrr_at(const RunResult& run, const Qrels& qrels, std::size_t n) {
  return average(run, qrels, n, [](std::size_t r) { return r ? 1.0 / static_cast<double>(r) : 0.0; });
}

MetricValue hits_at(const RunResult& run, const Qrels& qrels, std::size_t n) {
  return average(run, qrels, n, [](std::size_t r) { return r ? 1.0 : 0.0; });
}

MetricValue vert(const RunResult& run, const Qrels& qrels, const Metric& g, std::uint32_t session) {
  Qrels visible;
  for (const auto& [qid, j] : qrels) {
    if (j.arrival_session <= session) visible.emplace(qid, j);
  }
  RunResult filtered;
  std::size_t unjudged = 0;
  for (const auto& [qid, ranking] : run) {
    if (visible.count(qid)) {
      filtered.emplace(qid, ranking);
    } else if (!qrels.count(qid)) {
      ++unjudged;
    }
  }
  MetricValue v = g(filtered, visible);
  v.skipped += unjudged;
  return v;
}

SessionMatrix::SessionMatrix(std::size_t sessions) : cells_(sessions) {
  for (std::size_t t = 0; t < sessions; ++t) cells_[t].resize(t + 1);
}

void SessionMatrix::set(std::size_t t, std::size_t i, double value) {
  if (t >= cells_.size() || i > t) throw std::invalid_argument("SessionMatrix: cell outside lower triangle");
  cells_[t][i] = value;
}

std::optional<double> SessionMatrix::get(std::size_t t, std::size_t i) const {
  if (t >= cells_.size() || i > t) return std::nullopt;
  return cells_[t][i];
}

bool SessionMatrix::complete() const {
  for (const auto& row : cells_)
    for (const auto& c : row)
      if (!c) return false;
  return !cells_.empty();
}

ContinualMetrics continual_metrics(const SessionMatrix& r) {
  if (!r.complete()) throw std::invalid_argument("continual_metrics: session matrix incomplete");
  const std::size_t last = r.sessions() - 1;
  ContinualMetrics out;
  for (std::size_t i = 0; i <= last; ++i) out.ap += *r.get(last, i);
  out.ap /= static_cast<double>(last + 1);
  if (last == 0) return out;
  double bwt = 0.0;
  double fwt = 0.0;
  for (std::size_t i = 0; i < last; ++i) bwt += *r.get(i, i) - *r.get(last, i);
  for (std::size_t i = 1; i <= last; ++i) fwt += *r.get(i, i);
  out.bwt = bwt / static_cast<double>(last);
  out.fwt = fwt / static_cast<double>(last);
  return out;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("bad number \"" + std::string(s) + "\" on line " + std::to_string(line_no), line_no);
  }
  return v;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + start, nl - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() != '#') fn(line, line_no);
    start = nl + 1;
  }
}

}  // namespace

Qrels parse_qrels(const std::string& text) {
  Qrels q;
  for_each_line(text, [&](std::string_view line, std::size_t no) {
    const auto f = split_tabs(line);
    if (f.size() != 3) throw FormatError("qrels line " + std::to_string(no) + ": expected 3 fields", no);
    const auto qid = parse_number<QueryId>(f[0], no);
    Judgment j{parse_number<DocId>(f[1], no), parse_number<std::uint32_t>(f[2], no)};
    if (!q.emplace(qid, j).second) {
      throw FormatError("qrels line " + std::to_string(no) + ": duplicate query " + std::to_string(qid), no);
    }
  });
  return q;
}

std::string format_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, j] : qrels) {
    out += std::to_string(qid) + '\t' + std::to_string(j.doc) + '\t' + std::to_string(j.arrival_session) + '\n';
  }
  return out;
}

Qrels load_qrels(const std::string& path) { return parse_qrels(read_file(path)); }

ScoredRun parse_run(const std::string& text) {
  std::map<QueryId, std::vector<std::pair<std::size_t, RunEntry>>> by_rank;
  for_each_line(text, [&](std::string_view line, std::size_t no) {
    const auto f = split_tabs(line);
    if (f.size() != 4) throw FormatError("run line " + std::to_string(no) + ": expected 4 fields", no);
    const auto qid = parse_number<QueryId>(f[0], no);
    const auto doc = parse_number<DocId>(f[1], no);
    const auto rank = parse_number<std::size_t>(f[2], no);
    const auto score = parse_number<double>(f[3], no);
    by_rank[qid].push_back({rank, {doc, score}});
  });
  ScoredRun run;
  for (auto& [qid, rows] : by_rank) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& list = run[qid];
    for (const auto& r : rows) {
      for (const auto& prev : list) {
        if (prev.doc == r.second.doc) {
          throw FormatError("run: duplicate doc " + std::to_string(prev.doc) + " for query " + std::to_string(qid), 0);
        }
      }
      list.push_back(r.second);
    }
  }
  return run;
}

std::string format_run(const ScoredRun& run) {
  std::string out;
  char buf[64];
  for (const auto& [qid, list] : run) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", list[r].score);
      out += std::to_string(qid) + '\t' + std::to_string(list[r].doc) + '\t' + std::to_string(r + 1) + '\t' + buf + '\n';
    }
  }
  return out;
}

RunResult ranked_ids(const ScoredRun& run) {
  RunResult out;
  for (const auto& [qid, list] : run) {
    auto& ids = out[qid];
    for (const auto& e : list) ids.push_back(e.doc);
  }
  return out;
}

}  // namespace ipqgr
