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
#include <vector>

#include "ipqgr/codebook.hpp"

namespace ipqgr {

class BinaryWriter;
class BinaryReader;

/// Per-position linear-softmax docid decoder. Position m scores the K_m
/// centroids of group m as W_m e + b_m; positions are conditionally
/// independent given the conditioning embedding e.
struct DecoderParams {
  std::vector<Matrix> weights;  // K_m x D
  std::vector<Vector> biases;   // K_m
  std::uint32_t session = 0;

  static DecoderParams zeros(std::span<const std::size_t> group_sizes, std::size_t dim);

  std::size_t num_groups() const noexcept { return weights.size(); }
  std::size_t dim() const noexcept { return weights.empty() ? 0 : static_cast<std::size_t>(weights[0].cols()); }
  std::size_t group_size(std::size_t m) const { return static_cast<std::size_t>(weights.at(m).rows()); }
  std::vector<std::size_t> group_sizes() const;
  std::size_t parameter_count() const;

  /// Appends zero rows so that group m has sizes[m] rows. Never shrinks.
  void grow_to(std::span<const std::size_t> sizes);
  bool same_shape(const DecoderParams& o) const;

  void axpy(double alpha, const DecoderParams& o);
  double squared_norm() const;
  /// Squared distance over the rows both share.
  double shared_squared_distance(const DecoderParams& o) const;

  void serialize(BinaryWriter& w) const;
  static DecoderParams deserialize(BinaryReader& r);
  bool operator==(const DecoderParams&) const = default;
};

/// Diagonal Fisher estimate, one non-negative entry per decoder parameter.
struct FisherDiag {
  DecoderParams values;
};

struct TrainingPair {
  Vector input;
  PqCode target;
};

/// log softmax(W_m e + b_m) for every group.
std::vector<Vector> group_log_probs(const Vector& e, const DecoderParams& theta);

/// sum_m log softmax(W_m e + b_m)[k_m]
double docid_log_prob(const Vector& e, const PqCode& code, const DecoderParams& theta);

struct MleResult {
  double loss = 0.0;
  DecoderParams grad;
};

/// Negative log-likelihood summed over pairs, with its analytic gradient.
MleResult mle_loss(std::span<const TrainingPair> pairs, const DecoderParams& theta);

/// Mean over pairs of the squared per-pair gradient of -log p.
FisherDiag estimate_fisher(std::span<const TrainingPair> pairs, const DecoderParams& theta);

struct EwcResult {
  double loss = 0.0;
  DecoderParams grad;  // shaped like theta; zero on appended rows
};

/// sum_l F_l (prev_l - theta_l)^2 over the parameters theta shares with
/// prev. Rows appended to theta after prev was taken are excluded.
EwcResult ewc_loss(const DecoderParams& theta, const DecoderParams& prev, const FisherDiag& fisher);

struct SessionTrainOptions {
  double lambda = 0.5;
  double step_size = 5e-2;
  std::size_t steps = 200;
};

struct SessionTrainResult {
  DecoderParams params;
  /// Total objective before the first step and after every step.
  std::vector<double> losses;
};

/// Full-batch training on
///   L = NLL(new docs) + NLL(bank docs) + NLL(pseudo queries) + lambda * EWC.
/// The step size applies to L divided by the number of pairs. The EWC term is
/// handled by its exact proximal map, which is stable for any lambda, and a
/// step is halved whenever it would raise L. `prev` is grown to the
/// codebook's sizes first; the result is tagged with `session`.
SessionTrainResult train_session(const DecoderParams& prev, const Codebook& cb, std::span<const TrainingPair> new_pairs,
                                 std::span<const TrainingPair> bank_pairs, std::span<const TrainingPair> pseudo_pairs,
                                 const FisherDiag* fisher, const SessionTrainOptions& opts, std::uint32_t session);

/// Prefix tree over assigned codes; leaves list documents in insertion order.
class DocidTrie {
 public:
  explicit DocidTrie(std::size_t depth = 0) : depth_(depth), nodes_(1) {}

  void insert(const PqCode& code, DocId doc);
  std::size_t depth() const noexcept { return depth_; }
  std::size_t num_docs() const noexcept { return num_docs_; }
  bool empty() const noexcept { return num_docs_ == 0; }

  struct Node {
    std::map<std::uint32_t, std::uint32_t> children;
    std::vector<DocId> docs;
  };
  const Node& node(std::uint32_t i) const { return nodes_.at(i); }
  static constexpr std::uint32_t kRoot = 0;

 private:
  std::size_t depth_;
  std::vector<Node> nodes_;
  std::size_t num_docs_ = 0;
};

struct ScoredDoc {
  DocId doc = 0;
  double score = 0.0;
  bool operator==(const ScoredDoc&) const = default;
};

/// Group-by-group beam search restricted to trie edges. Final codes expand
/// to their documents, which share the code's score. Sorted by score
/// descending, then doc id ascending; at most top_n entries.
std::vector<ScoredDoc> constrained_beam_search(const Vector& query, const DecoderParams& theta, const DocidTrie& trie,
                                               std::size_t beam, std::size_t top_n);

}  // namespace ipqgr
