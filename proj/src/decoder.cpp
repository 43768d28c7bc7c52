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

#include "ipqgr/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

#include "ipqgr/errors.hpp"
#include "ipqgr/io.hpp"

namespace ipqgr {

DecoderParams DecoderParams::zeros(std::span<const std::size_t> group_sizes, std::size_t dim) {
  DecoderParams p;
  for (std::size_t k : group_sizes) {
    p.weights.push_back(Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim)));
    p.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(k)));
  }
  return p;
}

std::vector<std::size_t> DecoderParams::group_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& w : weights) out.push_back(static_cast<std::size_t>(w.rows()));
  return out;
}

std::size_t DecoderParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t m = 0; m < weights.size(); ++m) n += static_cast<std::size_t>(weights[m].size() + biases[m].size());
  return n;
}

void DecoderParams::grow_to(std::span<const std::size_t> sizes) {
  if (sizes.size() != weights.size()) throw std::invalid_argument("grow_to: group count mismatch");
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    const auto old_rows = weights[m].rows();
    const auto rows = static_cast<Eigen::Index>(sizes[m]);
    if (rows <= old_rows) continue;
    weights[m].conservativeResize(rows, Eigen::NoChange);
    weights[m].bottomRows(rows - old_rows).setZero();
    biases[m].conservativeResize(rows);
    biases[m].tail(rows - old_rows).setZero();
  }
}

bool DecoderParams::same_shape(const DecoderParams& o) const {
  if (weights.size() != o.weights.size()) return false;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (weights[m].rows() != o.weights[m].rows() || weights[m].cols() != o.weights[m].cols()) return false;
  }
  return true;
}

void DecoderParams::axpy(double alpha, const DecoderParams& o) {
  if (!same_shape(o)) throw std::invalid_argument("DecoderParams::axpy: shape mismatch");
  for (std::size_t m = 0; m < weights.size(); ++m) {
    weights[m] += alpha * o.weights[m];
    biases[m] += alpha * o.biases[m];
  }
}

double DecoderParams::squared_norm() const {
  double s = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) s += weights[m].squaredNorm() + biases[m].squaredNorm();
  return s;
}

double DecoderParams::shared_squared_distance(const DecoderParams& o) const {
  if (weights.size() != o.weights.size()) throw std::invalid_argument("shared_squared_distance: group count mismatch");
  double s = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const auto rows = std::min(weights[m].rows(), o.weights[m].rows());
    s += (weights[m].topRows(rows) - o.weights[m].topRows(rows)).squaredNorm();
    s += (biases[m].head(rows) - o.biases[m].head(rows)).squaredNorm();
  }
  return s;
}

void DecoderParams::serialize(BinaryWriter& w) const {
  w.u32(session);
  w.u64(weights.size());
  for (std::size_t m = 0; m < weights.size(); ++m) {
    w.mat(weights[m]);
    w.vec(biases[m]);
  }
}

DecoderParams DecoderParams::deserialize(BinaryReader& r) {
  DecoderParams p;
  p.session = r.u32();
  const std::uint64_t groups = r.u64();
  for (std::uint64_t m = 0; m < groups; ++m) {
    p.weights.push_back(r.mat());
    p.biases.push_back(r.vec());
    if (p.weights.back().rows() != p.biases.back().size()) throw FormatError("decoder: row/bias mismatch", r.pos());
  }
  return p;
}

namespace {

Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

void check_input(const Vector& e, const DecoderParams& theta) {
  if (theta.weights.empty()) throw std::invalid_argument("decoder: no groups");
  if (static_cast<std::size_t>(e.size()) != theta.dim()) {
    throw std::invalid_argument("decoder: input dimension " + std::to_string(e.size()) + " != " +
                                std::to_string(theta.dim()));
  }
}

void check_code(const PqCode& code, const DecoderParams& theta) {
  if (code.size() != theta.num_groups()) throw std::invalid_argument("decoder: code length mismatch");
  for (std::size_t m = 0; m < code.size(); ++m) {
    if (code[m] >= theta.group_size(m)) {
      throw std::invalid_argument("decoder: index " + std::to_string(code[m]) + " out of range in group " +
                                  std::to_string(m));
    }
  }
}

}  // namespace

std::vector<Vector> group_log_probs(const Vector& e, const DecoderParams& theta) {
  check_input(e, theta);
  std::vector<Vector> out;
  out.reserve(theta.num_groups());
  for (std::size_t m = 0; m < theta.num_groups(); ++m) {
    out.push_back(log_softmax(theta.weights[m] * e + theta.biases[m]));
  }
  return out;
}

double docid_log_prob(const Vector& e, const PqCode& code, const DecoderParams& theta) {
  check_code(code, theta);
  const auto lp = group_log_probs(e, theta);
  double s = 0.0;
  for (std::size_t m = 0; m < code.size(); ++m) s += lp[m][code[m]];
  return s;
}

MleResult mle_loss(std::span<const TrainingPair> pairs, const DecoderParams& theta) {
  if (pairs.empty()) throw std::invalid_argument("mle_loss: no pairs");
  MleResult out;
  out.grad = DecoderParams::zeros(theta.group_sizes(), theta.dim());
  for (const auto& pr : pairs) {
    check_code(pr.target, theta);
    const auto lp = group_log_probs(pr.input, theta);
    for (std::size_t m = 0; m < lp.size(); ++m) {
      out.loss -= lp[m][pr.target[m]];
      Vector delta = lp[m].array().exp().matrix();
      delta[pr.target[m]] -= 1.0;
      out.grad.weights[m].noalias() += delta * pr.input.transpose();
      out.grad.biases[m] += delta;
    }
  }
  return out;
}

FisherDiag estimate_fisher(std::span<const TrainingPair> pairs, const DecoderParams& theta) {
  if (pairs.empty()) throw std::invalid_argument("estimate_fisher: no pairs");
  FisherDiag f{DecoderParams::zeros(theta.group_sizes(), theta.dim())};
  f.values.session = theta.session;
  for (const auto& pr : pairs) {
    check_code(pr.target, theta);
    const auto lp = group_log_probs(pr.input, theta);
    const Vector e2 = pr.input.array().square().matrix();
    for (std::size_t m = 0; m < lp.size(); ++m) {
      Vector delta = lp[m].array().exp().matrix();
      delta[pr.target[m]] -= 1.0;
      const Vector d2 = delta.array().square().matrix();
      f.values.weights[m].noalias() += d2 * e2.transpose();
      f.values.biases[m] += d2;
    }
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (std::size_t m = 0; m < f.values.num_groups(); ++m) {
    f.values.weights[m] *= inv;
    f.values.biases[m] *= inv;
  }
  return f;
}

namespace {

void check_ewc_shapes(const DecoderParams& theta, const DecoderParams& prev, const FisherDiag& fisher) {
  if (!fisher.values.same_shape(prev)) throw std::invalid_argument("ewc: Fisher shape does not match previous params");
  if (theta.num_groups() != prev.num_groups() || theta.dim() != prev.dim()) {
    throw std::invalid_argument("ewc: group count or dimension mismatch");
  }
  for (std::size_t m = 0; m < theta.num_groups(); ++m) {
    if (theta.group_size(m) < prev.group_size(m)) {
      throw std::invalid_argument("ewc: current params have fewer rows than previous in group " + std::to_string(m));
    }
  }
}

}  // namespace

EwcResult ewc_loss(const DecoderParams& theta, const DecoderParams& prev, const FisherDiag& fisher) {
  check_ewc_shapes(theta, prev, fisher);
  EwcResult out;
  out.grad = DecoderParams::zeros(theta.group_sizes(), theta.dim());
  for (std::size_t m = 0; m < theta.num_groups(); ++m) {
    const auto rows = prev.weights[m].rows();
    const Matrix dw = theta.weights[m].topRows(rows) - prev.weights[m];
    const Vector db = theta.biases[m].head(rows) - prev.biases[m];
    out.loss += (fisher.values.weights[m].array() * dw.array().square()).sum();
    out.loss += (fisher.values.biases[m].array() * db.array().square()).sum();
    out.grad.weights[m].topRows(rows) = 2.0 * (fisher.values.weights[m].array() * dw.array()).matrix();
    out.grad.biases[m].head(rows) = 2.0 * (fisher.values.biases[m].array() * db.array()).matrix();
  }
  return out;
}

SessionTrainResult train_session(const DecoderParams& prev, const Codebook& cb, std::span<const TrainingPair> new_pairs,
                                 std::span<const TrainingPair> bank_pairs, std::span<const TrainingPair> pseudo_pairs,
                                 const FisherDiag* fisher, const SessionTrainOptions& opts, std::uint32_t session) {
  if (prev.num_groups() != cb.num_groups()) throw InvalidStateError("train_session: decoder/codebook group mismatch");
  if (opts.lambda < 0.0 || !(opts.step_size > 0.0)) throw std::invalid_argument("train_session: bad options");

  SessionTrainResult out;
  out.params = prev;
  out.params.grow_to(cb.group_sizes());
  out.params.session = session;

  std::vector<TrainingPair> pairs;
  pairs.reserve(new_pairs.size() + bank_pairs.size() + pseudo_pairs.size());
  for (auto src : {new_pairs, bank_pairs, pseudo_pairs}) pairs.insert(pairs.end(), src.begin(), src.end());

  const bool use_ewc = fisher != nullptr && opts.lambda > 0.0;
  if (use_ewc) check_ewc_shapes(out.params, prev, *fisher);

  auto objective = [&](const DecoderParams& theta) {
    double l = pairs.empty() ? 0.0 : mle_loss(pairs, theta).loss;
    if (use_ewc) l += opts.lambda * ewc_loss(theta, prev, *fisher).loss;
    return l;
  };

  double current = objective(out.params);
  out.losses.push_back(current);
  if (pairs.empty()) return out;

  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const DecoderParams grad = mle_loss(pairs, out.params).grad;
    double eta = opts.step_size * scale;
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries, eta *= 0.5) {
      DecoderParams cand = out.params;
      cand.axpy(-eta, grad);
      if (use_ewc) {
        // Exact minimiser of ||x - cand||^2 / (2 eta) + lambda F (x - prev)^2, per coordinate.
        const double c = 2.0 * eta * opts.lambda;
        for (std::size_t m = 0; m < cand.num_groups(); ++m) {
          const auto rows = prev.weights[m].rows();
          const auto& fw = fisher->values.weights[m].array();
          const auto& fb = fisher->values.biases[m].array();
          cand.weights[m].topRows(rows) =
              ((cand.weights[m].topRows(rows).array() + c * fw * prev.weights[m].array()) / (1.0 + c * fw)).matrix();
          cand.biases[m].head(rows) =
              ((cand.biases[m].head(rows).array() + c * fb * prev.biases[m].array()) / (1.0 + c * fb)).matrix();
        }
      }
      const double l = objective(cand);
      if (std::isfinite(l) && l <= current) {
        out.params = std::move(cand);
        current = l;
        accepted = true;
      }
    }
    if (!accepted) break;
    out.losses.push_back(current);
  }
  return out;
}

void DocidTrie::insert(const PqCode& code, DocId doc) {
  if (depth_ == 0) depth_ = code.size();
  if (code.size() != depth_) throw std::invalid_argument("DocidTrie: code length " + std::to_string(code.size()) +
                                                         " != depth " + std::to_string(depth_));
  std::uint32_t cur = kRoot;
  for (std::size_t m = 0; m < code.size(); ++m) {
    auto it = nodes_[cur].children.find(code[m]);
    if (it == nodes_[cur].children.end()) {
      const auto next = static_cast<std::uint32_t>(nodes_.size());
      nodes_[cur].children.emplace(code[m], next);
      nodes_.emplace_back();
      cur = next;
    } else {
      cur = it->second;
    }
  }
  nodes_[cur].docs.push_back(doc);
  ++num_docs_;
}

std::vector<ScoredDoc> constrained_beam_search(const Vector& query, const DecoderParams& theta, const DocidTrie& trie,
                                               std::size_t beam, std::size_t top_n) {
  if (beam == 0) throw std::invalid_argument("constrained_beam_search: beam must be at least 1");
  std::vector<ScoredDoc> out;
  if (trie.empty()) return out;
  if (trie.depth() != theta.num_groups()) throw std::invalid_argument("constrained_beam_search: trie depth mismatch");
  const auto lp = group_log_probs(query, theta);

  struct Hyp {
    double score;
    std::vector<std::uint32_t> prefix;
    std::uint32_t node;
  };
  std::vector<Hyp> beams{{0.0, {}, DocidTrie::kRoot}};
  for (std::size_t m = 0; m < trie.depth(); ++m) {
    std::vector<Hyp> next;
    for (const Hyp& h : beams) {
      for (const auto& [k, child] : trie.node(h.node).children) {
        if (k >= theta.group_size(m)) {
          throw std::invalid_argument("constrained_beam_search: trie index " + std::to_string(k) +
                                      " outside decoder group " + std::to_string(m));
        }
        Hyp c{h.score + lp[m][k], h.prefix, child};
        c.prefix.push_back(k);
        next.push_back(std::move(c));
      }
    }
    std::sort(next.begin(), next.end(), [](const Hyp& a, const Hyp& b) {
      return std::tie(b.score, a.prefix) < std::tie(a.score, b.prefix);
    });
    if (next.size() > beam) next.resize(beam);
    beams = std::move(next);
  }
  for (const Hyp& h : beams) {
    for (DocId d : trie.node(h.node).docs) out.push_back({d, h.score});
  }
  std::sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.doc < b.doc;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

}  // namespace ipqgr
