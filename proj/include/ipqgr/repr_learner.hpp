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

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "ipqgr/codebook.hpp"
#include "ipqgr/vector_core.hpp"

namespace ipqgr {

/// A document as a sequence of token embeddings, one row per token.
struct TokenDocument {
  Matrix tokens;

  std::size_t length() const noexcept { return static_cast<std::size_t>(tokens.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(tokens.cols()); }
};

enum class Granularity { Word, Phrase, Sentence, Paragraph };

struct GranularitySpec {
  Granularity level = Granularity::Word;
  std::size_t min_len = 1;
  std::size_t max_len = 1;
};

/// Word 1-4, phrase 4-16, sentence 16-64, paragraph 64-128 tokens.
std::array<GranularitySpec, 4> default_granularities();

/// A contiguous window over 1-based token positions: tokens
/// start, ..., end-1 (so 1 <= start < end <= n).
struct Span {
  std::size_t start = 1;
  std::size_t end = 2;

  std::size_t length() const noexcept { return end - start; }
};

/// Length p*(max-min)+min with p ~ Beta(alpha, beta), rounded and clamped to
/// [1, n-1]; start uniform on [1, n-length].
Span sample_span(const TokenDocument& doc, const GranularitySpec& g, double alpha, double beta,
                 RandomSource& rng);

/// Mean of the token vectors covered by `span`.
Vector pool_span(const TokenDocument& doc, const Span& span);
/// Mean of all token vectors.
Vector pool_all(const TokenDocument& doc);

/// Two-layer tanh projector: out = W2 tanh(W1 p + b1) + b2.
struct ProjectorParams {
  Matrix w1;  // H x E
  Vector b1;  // H
  Matrix w2;  // D x H
  Vector b2;  // D

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(w1.rows()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(w2.rows()); }

  static ProjectorParams zeros(std::size_t in, std::size_t hidden, std::size_t out);
  /// Gaussian weights with standard deviation 1/sqrt(fan_in), zero biases.
  static ProjectorParams random(std::size_t in, std::size_t hidden, std::size_t out, RandomSource& rng);

  Vector forward(const Vector& input) const;
  /// Accumulates dL/dparams into `grad` given dL/dout at `input`.
  void backward(const Vector& input, const Vector& dout, ProjectorParams& grad) const;

  void axpy(double alpha, const ProjectorParams& other);
  double squared_norm() const;
  bool operator==(const ProjectorParams&) const = default;
};

Vector doc_embedding(const TokenDocument& doc, const ProjectorParams& proj);

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<Vector> doc_grads;
  std::vector<Vector> span_grads;
};

/// Span-contrastive loss over one mini-batch. doc_reps holds the N anchors;
/// span_reps holds 4G span representations per document, document i's at
/// [i*4G, (i+1)*4G). Similarity is the dot product divided by tau; each
/// anchor's denominator runs over every other representation in the batch.
ContrastiveResult contrastive_loss(std::span<const Vector> doc_reps, std::span<const Vector> span_reps,
                                   double tau, std::size_t spans_per_granularity);

struct ClusteringResult {
  double loss = 0.0;
  std::vector<Vector> grads;
};

/// Sum of squared distances between each representation and its
/// reconstruction under `cb`. Reconstructions are constants for the gradient.
ClusteringResult clustering_loss(std::span<const Vector> reps, const Codebook& cb);
/// Same, with the assignments fixed to `codes`.
ClusteringResult clustering_loss(std::span<const Vector> reps, const Codebook& cb, std::span<const PqCode> codes);

struct ReprTrainOptions {
  std::size_t num_groups = 2;
  std::size_t k = 4;
  std::size_t epochs = 2;
  std::size_t output_dim = 8;
  /// 0 means hidden = output_dim.
  std::size_t hidden_dim = 0;
  double tau = 0.1;
  std::size_t spans_per_granularity = 5;
  double alpha = 4.0;
  double beta = 2.0;
  double step_size = 1e-2;
  std::size_t inner_iters = 20;
  std::size_t batch_size = 32;
  std::size_t kmeans_iters = kDefaultKMeansIters;
  std::array<GranularitySpec, 4> granularities = default_granularities();
};

struct ReprTrainResult {
  ProjectorParams projector;
  Codebook codebook;
  std::vector<PqCode> codes;
  /// Clustering loss right after every Step-1 clustering (epochs + 1 entries).
  std::vector<double> mse_history;
  /// Step-2 objective before the first and after every inner iteration, per epoch.
  std::vector<std::vector<double>> step2_losses;
};

/// Alternates per-group k-means over the current representations (Step 1)
/// with gradient descent on the projector against contrastive plus
/// clustering loss, assignments frozen (Step 2), for `epochs` rounds, then
/// clusters once more to produce the returned codebook and codes.
ReprTrainResult iterative_train(std::span<const TokenDocument> corpus, const ReprTrainOptions& opts,
                                RandomSource& rng, const ProjectorParams* init = nullptr,
                                std::span<const DocId> ids = {});

}  // namespace ipqgr
