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

#include "ipqgr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "ipqgr/errors.hpp"
#include "ipqgr/io.hpp"

namespace ipqgr {

using nlohmann::json;

namespace {

// Stream identifiers for RandomSource::derive_seed.
enum Stream : std::uint64_t {
  kSplit = 1,
  kCodebook = 2,
  kBank = 3,
  kPseudo = 4,
  kRandomBank = 5,
  kRepr = 6,
  kSynthetic = 7,
};

RandomSource stream(std::uint64_t seed, Stream s, std::uint64_t t = 0) {
  return RandomSource(RandomSource::derive_seed(seed, s, t));
}

Vector gaussian(std::size_t dim, double sigma, RandomSource& rng) {
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = sigma * rng.normal();
  return v;
}

TokenDocument token_doc(const Vector& latent, std::size_t n, double noise, RandomSource& rng) {
  TokenDocument d{Matrix(static_cast<Eigen::Index>(n), latent.size())};
  for (std::size_t t = 0; t < n; ++t) d.tokens.row(static_cast<Eigen::Index>(t)) = (latent + gaussian(latent.size(), noise, rng)).transpose();
  return d;
}

}  // namespace

SessionSplit split_benchmark(std::size_t num_docs, const std::vector<double>& fractions, RandomSource& rng) {
  if (fractions.empty()) throw std::invalid_argument("split_benchmark: no fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("split_benchmark: negative fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split_benchmark: fractions sum to " + std::to_string(total) + ", expected 1");
  }
  std::vector<DocId> order(num_docs);
  for (std::size_t i = 0; i < num_docs; ++i) order[i] = i;
  for (std::size_t i = num_docs; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

  SessionSplit out;
  out.doc_session.assign(num_docs, 0);
  out.sessions.resize(fractions.size());
  double cum = 0.0;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    cum += fractions[s];
    std::size_t end = s + 1 == fractions.size()
                          ? num_docs
                          : std::min(num_docs, static_cast<std::size_t>(std::llround(cum * static_cast<double>(num_docs))));
    end = std::max(end, begin);
    for (std::size_t i = begin; i < end; ++i) {
      out.sessions[s].push_back(order[i]);
      out.doc_session[order[i]] = static_cast<std::uint32_t>(s);
    }
    std::sort(out.sessions[s].begin(), out.sessions[s].end());
    begin = end;
  }
  return out;
}

ExperimentData generate_synthetic(const ExperimentConfig& cfg, bool with_tokens) {
  const SyntheticConfig& sc = cfg.synthetic;
  if (sc.num_docs == 0 || sc.num_topics == 0) throw std::invalid_argument("synthetic: empty corpus");
  if (with_tokens && (sc.min_tokens < 2 || sc.max_tokens < sc.min_tokens || sc.query_tokens < 1)) {
    throw std::invalid_argument("synthetic: bad token length bounds");
  }
  RandomSource rng = stream(cfg.seed, kSynthetic);
  const std::size_t latent_dim = with_tokens ? sc.token_dim : cfg.dim;

  std::vector<Vector> centers;
  for (std::size_t t = 0; t < sc.num_topics; ++t) centers.push_back(gaussian(latent_dim, sc.topic_scale, rng));

  ExperimentData d;
  std::vector<Vector> latents;
  for (std::size_t i = 0; i < sc.num_docs; ++i) {
    const Vector& c = centers[rng.uniform_index(sc.num_topics)];
    latents.push_back(c + gaussian(latent_dim, sc.doc_noise, rng));
  }

  RandomSource split_rng = stream(cfg.seed, kSplit);
  const SessionSplit split = split_benchmark(sc.num_docs, cfg.session_fractions, split_rng);

  for (std::size_t i = 0; i < sc.num_docs; ++i) {
    const auto arrival = split.doc_session[i];
    for (std::size_t q = 0; q < sc.train_queries_per_doc; ++q) {
      d.train_qrels[d.train_queries.size()] = {i, arrival};
      d.train_queries.push_back(latents[i] + gaussian(latent_dim, sc.query_noise, rng));
    }
    d.test_qrels[i] = {i, arrival};
    d.test_queries.push_back(latents[i] + gaussian(latent_dim, sc.query_noise, rng));
  }

  if (with_tokens) {
    for (std::size_t i = 0; i < sc.num_docs; ++i) {
      const std::size_t n = sc.min_tokens + rng.uniform_index(sc.max_tokens - sc.min_tokens + 1);
      d.doc_tokens.push_back(token_doc(latents[i], n, sc.token_noise, rng));
    }
    for (const Vector& q : d.train_queries) d.train_query_tokens.push_back(token_doc(q, sc.query_tokens, sc.token_noise, rng));
    for (const Vector& q : d.test_queries) d.test_query_tokens.push_back(token_doc(q, sc.query_tokens, sc.token_noise, rng));
    d.train_queries.clear();
    d.test_queries.clear();
  } else {
    d.doc_embeddings = std::move(latents);
  }
  return d;
}

ExperimentData load_data_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path p(dir);
  ExperimentData d;
  if (fs::exists(p / "docs.tok")) {
    d.doc_tokens = load_tokens((p / "docs.tok").string());
    d.train_query_tokens = load_tokens((p / "train_queries.tok").string());
    d.test_query_tokens = load_tokens((p / "test_queries.tok").string());
  } else {
    d.doc_embeddings = load_embeddings((p / "docs.emb").string());
    d.train_queries = load_embeddings((p / "train_queries.emb").string());
    d.test_queries = load_embeddings((p / "test_queries.emb").string());
  }
  d.train_qrels = load_qrels((p / "train_qrels.tsv").string());
  d.test_qrels = load_qrels((p / "test_qrels.tsv").string());
  return d;
}

void save_data_dir(const std::string& dir, const ExperimentData& d) {
  namespace fs = std::filesystem;
  const fs::path p(dir);
  fs::create_directories(p);
  if (d.has_tokens()) {
    save_tokens((p / "docs.tok").string(), d.doc_tokens);
    save_tokens((p / "train_queries.tok").string(), d.train_query_tokens);
    save_tokens((p / "test_queries.tok").string(), d.test_query_tokens);
  } else {
    save_embeddings((p / "docs.emb").string(), d.doc_embeddings);
    save_embeddings((p / "train_queries.emb").string(), d.train_queries);
    save_embeddings((p / "test_queries.emb").string(), d.test_queries);
  }
  write_file((p / "train_qrels.tsv").string(), format_qrels(d.train_qrels));
  write_file((p / "test_qrels.tsv").string(), format_qrels(d.test_qrels));
}

Experiment::Experiment(ExperimentConfig cfg, ExperimentData data) : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  RandomSource split_rng = stream(cfg_.seed, kSplit);
  split_ = split_benchmark(data_.num_docs(), cfg_.session_fractions, split_rng);
  for (const auto& [qid, j] : data_.test_qrels) {
    if (j.doc >= data_.num_docs()) throw std::invalid_argument("test qrels reference unknown doc " + std::to_string(j.doc));
    test_qrels_[qid] = {j.doc, split_.doc_session[j.doc]};
  }
  state_.config = cfg_;
  state_.progress = {{"sessions", json::array()}};
  if (!data_.has_tokens()) prepare_embeddings();
}

Experiment::Experiment(EngineState state, ExperimentData data) : Experiment(state.config, std::move(data)) {
  state_ = std::move(state);
  completed_ = state_.session + 1;
  if (completed_ > num_sessions()) throw InvalidStateError("engine state is past the last session");
  if (data_.has_tokens()) {
    if (!state_.projector) throw InvalidStateError("engine state lacks the projector needed for token input");
    prepare_embeddings();
  }
}

void Experiment::prepare_embeddings() {
  auto embed_all = [&](const std::vector<TokenDocument>& docs) {
    std::vector<Vector> out;
    for (const auto& d : docs) out.push_back(doc_embedding(d, *state_.projector));
    return out;
  };
  if (data_.has_tokens()) {
    doc_emb_ = embed_all(data_.doc_tokens);
    train_q_emb_ = embed_all(data_.train_query_tokens);
    test_q_emb_ = embed_all(data_.test_query_tokens);
  } else {
    doc_emb_ = data_.doc_embeddings;
    train_q_emb_ = data_.train_queries;
    test_q_emb_ = data_.test_queries;
  }
  for (const auto* set : {&doc_emb_, &train_q_emb_, &test_q_emb_}) {
    for (const Vector& v : *set) {
      if (static_cast<std::size_t>(v.size()) != cfg_.dim) {
        throw std::invalid_argument("embedding dimension " + std::to_string(v.size()) + " != configured dim " +
                                    std::to_string(cfg_.dim));
      }
    }
  }
  for (const auto& [qid, j] : data_.train_qrels) {
    if (qid >= train_q_emb_.size() || j.doc >= doc_emb_.size()) throw std::invalid_argument("train qrels out of range");
  }
  for (const auto& [qid, j] : test_qrels_) {
    if (qid >= test_q_emb_.size()) throw std::invalid_argument("test qrels reference unknown query " + std::to_string(qid));
  }
}

std::vector<TrainingPair> Experiment::doc_pairs(const std::vector<DocId>& docs) const {
  std::vector<TrainingPair> out;
  out.reserve(docs.size());
  for (DocId d : docs) out.push_back({doc_emb_[d], state_.codes.at(d).code});
  return out;
}

void Experiment::step() {
  if (finished()) throw InvalidStateError("experiment already finished");
  const auto start = std::chrono::steady_clock::now();
  const auto t = static_cast<std::uint32_t>(completed_);
  if (t == 0) {
    build_base();
  } else {
    ingest(t);
  }
  if (cfg_.emit_timing) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state_.progress["sessions"].back()["wall_seconds"] = secs;
  }
  ++completed_;
}

void Experiment::run_to_end() {
  while (!finished()) step();
}

void Experiment::build_base() {
  const std::vector<DocId>& base = split_.sessions[0];
  if (base.size() < cfg_.k) {
    throw std::invalid_argument("session 0 has " + std::to_string(base.size()) + " documents, fewer than K=" +
                                std::to_string(cfg_.k));
  }
  RandomSource rng = stream(cfg_.seed, kCodebook, 0);
  json block;
  block["session"] = 0;

  BaseCodebook built;
  if (data_.has_tokens()) {
    ReprTrainOptions o;
    o.num_groups = cfg_.num_groups;
    o.k = cfg_.k;
    o.epochs = cfg_.flags.representation_learning ? cfg_.repr_epochs : 0;
    o.output_dim = cfg_.dim;
    o.hidden_dim = cfg_.projector_hidden;
    o.tau = cfg_.tau;
    o.spans_per_granularity = cfg_.spans_per_granularity;
    o.alpha = cfg_.span_alpha;
    o.beta = cfg_.span_beta;
    o.step_size = cfg_.repr_step_size;
    o.inner_iters = cfg_.repr_inner_iters;
    o.batch_size = cfg_.repr_batch_size;
    o.kmeans_iters = cfg_.kmeans_iters;
    std::vector<TokenDocument> corpus;
    for (DocId d : base) corpus.push_back(data_.doc_tokens[d]);
    RandomSource repr_rng = stream(cfg_.seed, kRepr);
    ReprTrainResult r = iterative_train(corpus, o, repr_rng, nullptr, base);
    state_.projector = r.projector;
    block["repr_mse"] = r.mse_history;
    prepare_embeddings();
    built.codebook = std::move(r.codebook);
    built.codes = std::move(r.codes);
  } else {
    std::vector<Vector> emb;
    for (DocId d : base) emb.push_back(doc_emb_[d]);
    built = build_base_codebook(emb, cfg_.num_groups, cfg_.k, rng, base, cfg_.kmeans_iters);
  }
  state_.codebook = std::move(built.codebook);
  for (std::size_t i = 0; i < base.size(); ++i) state_.codes[base[i]] = {built.codes[i], 0};

  const std::vector<TrainingPair> index_pairs = doc_pairs(base);
  std::vector<TrainingPair> query_pairs;
  for (const auto& [qid, j] : data_.train_qrels) {
    if (split_.doc_session[j.doc] == 0) query_pairs.push_back({train_q_emb_[qid], state_.codes.at(j.doc).code});
  }
  const DecoderParams zero = DecoderParams::zeros(state_.codebook.group_sizes(), cfg_.dim);
  SessionTrainOptions opts{0.0, cfg_.decoder_step_size, cfg_.base_steps};
  SessionTrainResult trained = train_session(zero, state_.codebook, index_pairs, {}, query_pairs, nullptr, opts, 0);
  state_.decoder = std::move(trained.params);

  std::vector<TrainingPair> all = index_pairs;
  all.insert(all.end(), query_pairs.begin(), query_pairs.end());
  state_.fisher = estimate_fisher(all, state_.decoder);
  state_.session = 0;

  block["new_docs"] = base.size();
  block["labeled_query_pairs"] = query_pairs.size();
  block["training_pairs"] = all.size();
  block["train_loss"] = {{"first", trained.losses.front()}, {"last", trained.losses.back()},
                         {"steps", trained.losses.size() - 1}};
  last_decisions_.clear();
  last_bank_ = {};
  evaluate(0, block);
}

void Experiment::ingest(std::uint32_t t) {
  const std::vector<DocId>& fresh = split_.sessions[t];
  json block;
  block["session"] = t;
  block["new_docs"] = fresh.size();

  std::vector<DocId> old_docs;
  for (const auto& [doc, issued] : state_.codes) old_docs.push_back(doc);

  std::vector<std::pair<DocId, PqCode>> new_codes;
  std::size_t old_changes = 0;
  std::size_t counts[3] = {0, 0, 0};
  const std::size_t centroids_before = state_.codebook.total_centroids();
  RandomSource rng = stream(cfg_.seed, kCodebook, t);

  if (cfg_.flags.recluster_each_session) {
    std::vector<DocId> all = old_docs;
    all.insert(all.end(), fresh.begin(), fresh.end());
    std::sort(all.begin(), all.end());
    std::vector<Vector> emb;
    for (DocId d : all) emb.push_back(doc_emb_[d]);
    BaseCodebook rebuilt = build_base_codebook(emb, cfg_.num_groups, cfg_.k, rng, all, cfg_.kmeans_iters);
    rebuilt.codebook.set_session(t);
    state_.codebook = std::move(rebuilt.codebook);
    std::set<DocId> fresh_set(fresh.begin(), fresh.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (fresh_set.count(all[i])) {
        new_codes.emplace_back(all[i], rebuilt.codes[i]);
      } else {
        IssuedCode& issued = state_.codes.at(all[i]);
        if (issued.code != rebuilt.codes[i]) {
          ++old_changes;
          issued = {rebuilt.codes[i], t};
        }
      }
    }
    last_decisions_.clear();
  } else {
    std::vector<std::pair<DocId, Vector>> docs;
    for (DocId d : fresh) docs.emplace_back(d, doc_emb_[d]);
    IngestResult r = ingest_session(state_.codebook, docs, t, rng, cfg_.flags.threshold_mode);
    new_codes = std::move(r.codes);
    for (const auto& d : r.log) ++counts[static_cast<int>(d.kind)];
    last_decisions_ = std::move(r.log);
  }

  CodeIndex old_index;
  for (DocId d : old_docs) old_index.add(d, state_.codes.at(d).code);
  for (const auto& [doc, code] : new_codes) state_.codes[doc] = {code, t};

  std::vector<DocId> bank_docs;
  last_bank_ = {};
  if (cfg_.flags.memory_bank) {
    last_bank_ = build_memory_bank(new_codes, old_index, cfg_.bank_repeats, state_.codebook,
                                   RandomSource::derive_seed(cfg_.seed, kBank, t), t);
    bank_docs = last_bank_.distinct_docs();
    if (cfg_.flags.random_bank) {
      RandomSource pick = stream(cfg_.seed, kRandomBank, t);
      std::vector<DocId> pool = old_docs;
      const std::size_t n = std::min(bank_docs.size(), pool.size());
      for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + pick.uniform_index(pool.size() - i)]);
      bank_docs.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
      std::sort(bank_docs.begin(), bank_docs.end());
    }
  }

  std::vector<DocId> fresh_ids;
  for (const auto& [doc, code] : new_codes) fresh_ids.push_back(doc);
  const std::vector<TrainingPair> new_pairs = doc_pairs(fresh_ids);
  std::vector<TrainingPair> bank_pairs;
  if (cfg_.flags.bank_mle) bank_pairs = doc_pairs(bank_docs);
  std::vector<TrainingPair> pseudo_pairs;
  if (cfg_.flags.pseudo_queries) {
    std::vector<DocId> sources = fresh_ids;
    sources.insert(sources.end(), bank_docs.begin(), bank_docs.end());
    for (DocId d : sources) {
      RandomSource qrng(RandomSource::derive_seed(cfg_.seed, kPseudo * 1000003ULL + t, d));
      for (auto& q : generate_pseudo_queries(d, doc_emb_[d], state_.codes.at(d).code, cfg_.pseudo_per_doc,
                                             cfg_.pseudo_sigma, qrng)) {
        pseudo_pairs.push_back({std::move(q.query), std::move(q.target_code)});
      }
    }
  }

  SessionTrainOptions opts{cfg_.flags.ewc ? cfg_.lambda : 0.0, cfg_.decoder_step_size, cfg_.session_steps};
  const FisherDiag* fisher = cfg_.flags.ewc && state_.fisher ? &*state_.fisher : nullptr;
  SessionTrainResult trained =
      train_session(state_.decoder, state_.codebook, new_pairs, bank_pairs, pseudo_pairs, fisher, opts, t);
  state_.decoder = std::move(trained.params);

  std::vector<TrainingPair> fisher_pairs = new_pairs;
  fisher_pairs.insert(fisher_pairs.end(), pseudo_pairs.begin(), pseudo_pairs.end());
  if (!fisher_pairs.empty()) state_.fisher = estimate_fisher(fisher_pairs, state_.decoder);
  state_.session = t;

  block["bank_docs"] = bank_docs.size();
  block["bank_entries"] = last_bank_.entries.size();
  block["pseudo_pairs"] = pseudo_pairs.size();
  block["training_pairs"] = new_pairs.size() + bank_pairs.size() + pseudo_pairs.size();
  block["decisions"] = {{"unchanged", counts[0]}, {"changed", counts[1]}, {"added", counts[2]}};
  block["centroids_added"] = state_.codebook.total_centroids() - centroids_before;
  block["old_code_changes"] = old_changes;
  block["train_loss"] = {{"first", trained.losses.front()}, {"last", trained.losses.back()},
                         {"steps", trained.losses.size() - 1}};
  evaluate(t, block);
}

ScoredRun Experiment::evaluate_run() const {
  ScoredRun run;
  if (completed_ == 0 && state_.codes.empty()) return run;
  const DocidTrie trie = state_.trie();
  for (const auto& [qid, j] : test_qrels_) {
    if (j.arrival_session > state_.session) continue;
    auto& list = run[qid];
    for (const ScoredDoc& s : constrained_beam_search(test_q_emb_[qid], state_.decoder, trie, cfg_.beam, cfg_.top_n)) {
      list.push_back({s.doc, s.score});
    }
  }
  return run;
}

void Experiment::evaluate(std::uint32_t t, json& block) {
  const RunResult run = ranked_ids(evaluate_run());
  const std::size_t n = cfg_.metric_cutoff;
  const Metric mrr = [n](const RunResult& r, const Qrels& q) { return mrr_at(r, q, n); };
  const Metric hits = [n](const RunResult& r, const Qrels& q) { return hits_at(r, q, n); };
  const Metric& g = cfg_.metric == "hits" ? hits : mrr;

  const MetricValue v_mrr = vert(run, test_qrels_, mrr, t);
  const MetricValue v_hits = vert(run, test_qrels_, hits, t);
  block["vert"] = {{"mrr", v_mrr.value}, {"hits", v_hits.value}, {"queries", v_mrr.evaluated}};

  json row = json::array();
  for (std::uint32_t i = 0; i <= t; ++i) {
    Qrels qi;
    RunResult ri;
    for (const auto& [qid, j] : test_qrels_) {
      if (j.arrival_session != i) continue;
      qi.emplace(qid, j);
      if (auto it = run.find(qid); it != run.end()) ri.emplace(qid, it->second);
    }
    row.push_back(g(ri, qi).value);
  }
  block["matrix_row"] = row;
  block["codebook_sizes"] = state_.codebook.group_sizes();
  block["state_size"] = {{"centroid_values", state_.codebook.total_centroids() * state_.codebook.sub_dim()},
                         {"decoder_params", state_.decoder.parameter_count()},
                         {"issued_codes", state_.codes.size()}};
  state_.progress["sessions"].push_back(std::move(block));
}

json Experiment::report() const {
  json r;
  r["schema_version"] = 1;
  r["config"] = config_to_json(cfg_);
  r["variant"] = cfg_.variant;
  r["setting"] = cfg_.setting == EvalSetting::Single ? "single" : "sequential";
  r["metric"] = cfg_.metric + "@" + std::to_string(cfg_.metric_cutoff);
  r["sessions_total"] = num_sessions();
  r["sessions_completed"] = completed_;
  json sessions = state_.progress.at("sessions");
  // Growth relative to the previous session.
  for (std::size_t i = 1; i < sessions.size(); ++i) {
    json& cur = sessions[i]["state_size"];
    const json& prev = sessions[i - 1]["state_size"];
    cur["centroid_values_growth"] = cur["centroid_values"].get<std::int64_t>() - prev["centroid_values"].get<std::int64_t>();
    cur["decoder_params_growth"] = cur["decoder_params"].get<std::int64_t>() - prev["decoder_params"].get<std::int64_t>();
  }
  r["sessions"] = sessions;

  SessionMatrix m(sessions.size());
  json matrix = json::array();
  for (std::size_t t = 0; t < sessions.size(); ++t) {
    const json& row = sessions[t].at("matrix_row");
    for (std::size_t i = 0; i < row.size(); ++i) m.set(t, i, row[i].get<double>());
    matrix.push_back(row);
  }
  r["session_matrix"] = matrix;
  if (finished() && m.complete()) {
    const ContinualMetrics c = continual_metrics(m);
    r["continual"] = {{"ap", c.ap},
                      {"bwt", c.bwt ? json(*c.bwt) : json(nullptr)},
                      {"fwt", c.fwt ? json(*c.fwt) : json(nullptr)}};
    const json& last = sessions.back().at("vert");
    r["final_vert"] = last;
  }
  return r;
}

json run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
  Experiment e(cfg, data);
  e.run_to_end();
  return e.report();
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

}  // namespace ipqgr
