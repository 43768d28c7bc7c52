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

#include "ipqgr/repr_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ipqgr {

std::array<GranularitySpec, 4> default_granularities() {
  return {{{Granularity::Word, 1, 4},
           {Granularity::Phrase, 4, 16},
           {Granularity::Sentence, 16, 64},
           {Granularity::Paragraph, 64, 128}}};
}

Span sample_span(const TokenDocument& doc, const GranularitySpec& g, double alpha, double beta,
                 RandomSource& rng) {
  const std::size_t n = doc.length();
  if (n < 2) throw std::invalid_argument("sample_span: document needs at least 2 tokens");
  if (g.min_len < 1 || g.min_len > g.max_len) throw std::invalid_argument("sample_span: bad length bounds");
  const double p = beta_sample(alpha, beta, rng);
  auto len = static_cast<std::size_t>(std::llround(p * static_cast<double>(g.max_len - g.min_len))) + g.min_len;
  len = std::clamp<std::size_t>(len, 1, n - 1);
  const std::size_t start = 1 + rng.uniform_index(n - len);
  return {start, start + len};
}

Vector pool_span(const TokenDocument& doc, const Span& span) {
  if (span.start >= span.end) throw std::invalid_argument("pool_span: empty span");
  if (span.start < 1 || span.end - 1 > doc.length()) throw std::invalid_argument("pool_span: span out of bounds");
  const auto first = static_cast<Eigen::Index>(span.start - 1);
  const auto count = static_cast<Eigen::Index>(span.length());
  return doc.tokens.middleRows(first, count).colwise().mean().transpose();
}

Vector pool_all(const TokenDocument& doc) {
  if (doc.length() == 0) throw std::invalid_argument("pool_all: empty document");
  return doc.tokens.colwise().mean().transpose();
}

ProjectorParams ProjectorParams::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  const auto e = static_cast<Eigen::Index>(in);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(out);
  return {Matrix::Zero(h, e), Vector::Zero(h), Matrix::Zero(d, h), Vector::Zero(d)};
}

ProjectorParams ProjectorParams::random(std::size_t in, std::size_t hidden, std::size_t out, RandomSource& rng) {
  ProjectorParams p = zeros(in, hidden, out);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index c = 0; c < p.w1.cols(); ++c)
    for (Eigen::Index r = 0; r < p.w1.rows(); ++r) p.w1(r, c) = s1 * rng.normal();
  for (Eigen::Index c = 0; c < p.w2.cols(); ++c)
    for (Eigen::Index r = 0; r < p.w2.rows(); ++r) p.w2(r, c) = s2 * rng.normal();
  return p;
}

Vector ProjectorParams::forward(const Vector& input) const {
  if (static_cast<std::size_t>(input.size()) != input_dim()) {
    throw std::invalid_argument("projector: input dimension " + std::to_string(input.size()) + ", expected " +
                                std::to_string(input_dim()));
  }
  const Vector h = (w1 * input + b1).array().tanh().matrix();
  return w2 * h + b2;
}

void ProjectorParams::backward(const Vector& input, const Vector& dout, ProjectorParams& grad) const {
  const Vector h = (w1 * input + b1).array().tanh().matrix();
  grad.w2.noalias() += dout * h.transpose();
  grad.b2 += dout;
  const Vector dpre = ((w2.transpose() * dout).array() * (1.0 - h.array().square())).matrix();
  grad.w1.noalias() += dpre * input.transpose();
  grad.b1 += dpre;
}

void ProjectorParams::axpy(double alpha, const ProjectorParams& o) {
  w1 += alpha * o.w1;
  b1 += alpha * o.b1;
  w2 += alpha * o.w2;
  b2 += alpha * o.b2;
}

double ProjectorParams::squared_norm() const {
  return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
}

Vector doc_embedding(const TokenDocument& doc, const ProjectorParams& proj) {
  return proj.forward(pool_all(doc));
}

ContrastiveResult contrastive_loss(std::span<const Vector> doc_reps, std::span<const Vector> span_reps,
                                   double tau, std::size_t spans_per_granularity) {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be positive");
  const std::size_t n = doc_reps.size();
  const std::size_t s = 4 * spans_per_granularity;
  if (n == 0 || s == 0) throw std::invalid_argument("contrastive_loss: empty batch");
  if (span_reps.size() != n * s) {
    throw std::invalid_argument("contrastive_loss: expected " + std::to_string(n * s) + " span representations, got " +
                                std::to_string(span_reps.size()));
  }
  // All representations in one list: anchors first, then spans.
  const std::size_t total = n + n * s;
  auto rep = [&](std::size_t j) -> const Vector& { return j < n ? doc_reps[j] : span_reps[j - n]; };
  const Eigen::Index dim = doc_reps[0].size();

  ContrastiveResult out;
  out.doc_grads.assign(n, Vector::Zero(dim));
  out.span_grads.assign(n * s, Vector::Zero(dim));
  auto grad = [&](std::size_t j) -> Vector& { return j < n ? out.doc_grads[j] : out.span_grads[j - n]; };

  std::vector<double> logits(total);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& a = doc_reps[i];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < total; ++j) {
      if (j == i) continue;
      logits[j] = a.dot(rep(j)) / tau;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < total; ++j) {
      if (j != i) z += std::exp(logits[j] - mx);
    }
    const double log_z = mx + std::log(z);

    const std::size_t pos_begin = n + i * s;
    double pos_sum = 0.0;
    for (std::size_t j = pos_begin; j < pos_begin + s; ++j) pos_sum += logits[j];
    out.loss += log_z - pos_sum / static_cast<double>(s);

    Vector& ga = out.doc_grads[i];
    for (std::size_t j = 0; j < total; ++j) {
      if (j == i) continue;
      double coef = std::exp(logits[j] - log_z);
      if (j >= pos_begin && j < pos_begin + s) coef -= 1.0 / static_cast<double>(s);
      coef /= tau;
      ga += coef * rep(j);
      grad(j) += coef * a;
    }
  }
  return out;
}

ClusteringResult clustering_loss(std::span<const Vector> reps, const Codebook& cb, std::span<const PqCode> codes) {
  if (codes.size() != reps.size()) throw std::invalid_argument("clustering_loss: code count mismatch");
  ClusteringResult out;
  out.grads.reserve(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (static_cast<std::size_t>(reps[i].size()) != cb.dim()) {
      throw std::invalid_argument("clustering_loss: representation dimension " + std::to_string(reps[i].size()) +
                                  " != codebook D " + std::to_string(cb.dim()));
    }
    const Vector diff = reps[i] - reconstruct(codes[i], cb);
    out.loss += diff.squaredNorm();
    out.grads.push_back(2.0 * diff);
  }
  return out;
}

ClusteringResult clustering_loss(std::span<const Vector> reps, const Codebook& cb) {
  std::vector<PqCode> codes;
  codes.reserve(reps.size());
  for (const Vector& r : reps) {
    if (static_cast<std::size_t>(r.size()) != cb.dim()) {
      throw std::invalid_argument("clustering_loss: representation dimension " + std::to_string(r.size()) +
                                  " != codebook D " + std::to_string(cb.dim()));
    }
    codes.push_back(quantize(r, cb));
  }
  return clustering_loss(reps, cb, codes);
}

namespace {

// Inputs of one Step-2 round: pooled document and span vectors are fixed,
// only the projector moves.
struct Step2Problem {
  std::vector<Vector> doc_inputs;
  std::vector<std::vector<Vector>> span_inputs;  // per document, 4G each
  std::vector<std::vector<std::size_t>> batches;
  const Codebook* codebook = nullptr;
  std::span<const PqCode> codes;
  double tau = 0.1;
  std::size_t g = 1;

  double evaluate(const ProjectorParams& proj, ProjectorParams* grad) const {
    std::vector<Vector> doc_reps(doc_inputs.size());
    for (std::size_t i = 0; i < doc_inputs.size(); ++i) doc_reps[i] = proj.forward(doc_inputs[i]);

    double loss = 0.0;
    std::vector<Vector> doc_grad(doc_inputs.size(), Vector::Zero(static_cast<Eigen::Index>(proj.output_dim())));
    for (const auto& batch : batches) {
      std::vector<Vector> anchors, spans;
      for (std::size_t i : batch) {
        anchors.push_back(doc_reps[i]);
        for (const Vector& in : span_inputs[i]) spans.push_back(proj.forward(in));
      }
      ContrastiveResult cl = contrastive_loss(anchors, spans, tau, g);
      loss += cl.loss;
      if (!grad) continue;
      const std::size_t s = 4 * g;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        doc_grad[batch[b]] += cl.doc_grads[b];
        for (std::size_t j = 0; j < s; ++j) {
          proj.backward(span_inputs[batch[b]][j], cl.span_grads[b * s + j], *grad);
        }
      }
    }
    ClusteringResult mse = clustering_loss(doc_reps, *codebook, codes);
    loss += mse.loss;
    if (grad) {
      for (std::size_t i = 0; i < doc_inputs.size(); ++i) {
        proj.backward(doc_inputs[i], doc_grad[i] + mse.grads[i], *grad);
      }
    }
    return loss;
  }
};

std::vector<Vector> represent(std::span<const TokenDocument> corpus, const ProjectorParams& proj) {
  std::vector<Vector> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) out.push_back(doc_embedding(d, proj));
  return out;
}

}  // namespace

ReprTrainResult iterative_train(std::span<const TokenDocument> corpus, const ReprTrainOptions& opts,
                                RandomSource& rng, const ProjectorParams* init, std::span<const DocId> ids) {
  if (corpus.size() < opts.k) {
    throw std::invalid_argument("iterative_train: corpus of " + std::to_string(corpus.size()) +
                                " documents is smaller than K=" + std::to_string(opts.k));
  }
  const std::size_t token_dim = corpus[0].dim();
  for (const auto& d : corpus) {
    if (d.dim() != token_dim) throw std::invalid_argument("iterative_train: inconsistent token dimension");
    if (opts.epochs > 0 && d.length() < 2) {
      throw std::invalid_argument("iterative_train: every document needs at least 2 tokens");
    }
  }

  ReprTrainResult out;
  const std::size_t hidden = opts.hidden_dim ? opts.hidden_dim : opts.output_dim;
  out.projector = init ? *init : ProjectorParams::random(token_dim, hidden, opts.output_dim, rng);
  if (out.projector.input_dim() != token_dim) {
    throw std::invalid_argument("iterative_train: projector input dimension does not match tokens");
  }

  auto step1 = [&]() {
    const std::vector<Vector> reps = represent(corpus, out.projector);
    BaseCodebook base = build_base_codebook(reps, opts.num_groups, opts.k, rng, ids, opts.kmeans_iters);
    out.codebook = std::move(base.codebook);
    out.codes = std::move(base.codes);
    out.mse_history.push_back(clustering_loss(reps, out.codebook, out.codes).loss);
  };

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    step1();

    Step2Problem prob;
    prob.codebook = &out.codebook;
    prob.codes = out.codes;
    prob.tau = opts.tau;
    prob.g = opts.spans_per_granularity;
    prob.span_inputs.resize(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      prob.doc_inputs.push_back(pool_all(corpus[i]));
      for (const auto& gran : opts.granularities) {
        for (std::size_t r = 0; r < opts.spans_per_granularity; ++r) {
          prob.span_inputs[i].push_back(pool_span(corpus[i], sample_span(corpus[i], gran, opts.alpha, opts.beta, rng)));
        }
      }
    }
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);
    for (std::size_t b = 0; b < order.size(); b += bs) {
      prob.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                                order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + bs)));
    }

    std::vector<double>& trace = out.step2_losses.emplace_back();
    ProjectorParams grad = ProjectorParams::zeros(token_dim, hidden, opts.output_dim);
    double current = prob.evaluate(out.projector, &grad);
    trace.push_back(current);
    for (std::size_t it = 0; it < opts.inner_iters; ++it) {
      // Fixed step, halved only when it would raise the objective.
      double step = opts.step_size;
      ProjectorParams next = out.projector;
      double next_loss = current;
      bool accepted = false;
      for (int tries = 0; tries < 40; ++tries) {
        next = out.projector;
        next.axpy(-step, grad);
        next_loss = prob.evaluate(next, nullptr);
        if (std::isfinite(next_loss) && next_loss <= current) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      out.projector = std::move(next);
      grad = ProjectorParams::zeros(token_dim, hidden, opts.output_dim);
      current = prob.evaluate(out.projector, &grad);
      trace.push_back(current);
    }
  }
  step1();
  return out;
}

}  // namespace ipqgr
