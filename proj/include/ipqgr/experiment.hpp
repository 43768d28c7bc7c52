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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipqgr/codebook.hpp"
#include "ipqgr/decoder.hpp"
#include "ipqgr/ipq_update.hpp"
#include "ipqgr/metrics.hpp"
#include "ipqgr/rehearsal.hpp"
#include "ipqgr/repr_learner.hpp"

namespace ipqgr {

enum class EvalSetting { Single, Sequential };

/// Switches that realise the model variants.
struct VariantFlags {
  bool memory_bank = true;
  /// Rehearse bank documents through the indexing loss (the d- term).
  bool bank_mle = true;
  bool pseudo_queries = true;
  bool ewc = true;
  ThresholdMode threshold_mode = ThresholdMode::Both;
  bool recluster_each_session = false;
  bool random_bank = false;
  /// Run the two-step representation learner on token input.
  bool representation_learning = true;
};

/// full, base, pq, pq-re, pq-dis, pq-dis-ad, pq-dis-md, no-ewc, no-mle-dneg,
/// no-mle-q, random-bank.
VariantFlags variant_flags(const std::string& name);
const std::vector<std::string>& variant_names();

struct SyntheticConfig {
  std::size_t num_docs = 500;
  std::size_t num_topics = 24;
  double topic_scale = 1.0;
  double doc_noise = 0.5;
  double query_noise = 0.2;
  std::size_t train_queries_per_doc = 1;
  /// Token corpora are only written when requested.
  std::size_t token_dim = 16;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 40;
  double token_noise = 0.5;
  std::size_t query_tokens = 4;
};

struct ExperimentConfig {
  std::size_t dim = 16;
  std::size_t num_groups = 4;
  std::size_t k = 8;
  std::size_t kmeans_iters = kDefaultKMeansIters;

  std::size_t repr_epochs = 2;
  std::size_t projector_hidden = 0;
  double tau = 0.1;
  std::size_t spans_per_granularity = 5;
  double span_alpha = 4.0;
  double span_beta = 2.0;
  double repr_step_size = 1e-2;
  std::size_t repr_inner_iters = 20;
  std::size_t repr_batch_size = 32;

  std::size_t bank_repeats = 10;
  double pseudo_sigma = 0.1;
  std::size_t pseudo_per_doc = 3;

  double lambda = 0.5;
  double decoder_step_size = 5e-2;
  std::size_t base_steps = 400;
  std::size_t session_steps = 200;

  std::size_t beam = 15;
  std::size_t top_n = 10;
  std::string metric = "mrr";
  std::size_t metric_cutoff = 10;

  std::uint64_t seed = 42;
  std::vector<double> session_fractions = {0.6, 0.1, 0.1, 0.1, 0.1};
  EvalSetting setting = EvalSetting::Sequential;
  std::string variant = "full";
  VariantFlags flags;
  bool emit_timing = false;

  SyntheticConfig synthetic;

  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
  /// Sets `variant` and the matching flags.
  void apply_variant(const std::string& name);
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Documents, queries and judgments. Query ids are row indices into the
/// matching query list; doc ids are row indices into the document list.
struct ExperimentData {
  std::vector<Vector> doc_embeddings;
  std::vector<Vector> train_queries;
  Qrels train_qrels;
  std::vector<Vector> test_queries;
  Qrels test_qrels;

  // Token input, either all present or all empty.
  std::vector<TokenDocument> doc_tokens;
  std::vector<TokenDocument> train_query_tokens;
  std::vector<TokenDocument> test_query_tokens;

  bool has_tokens() const noexcept { return !doc_tokens.empty(); }
  std::size_t num_docs() const noexcept {
    return has_tokens() ? doc_tokens.size() : doc_embeddings.size();
  }
};

/// Reads docs.emb, train_queries.emb, train_qrels.tsv, test_queries.emb,
/// test_qrels.tsv and, when docs.tok exists, the three .tok files.
ExperimentData load_data_dir(const std::string& dir);
void save_data_dir(const std::string& dir, const ExperimentData& data);

struct SessionSplit {
  std::vector<std::uint32_t> doc_session;
  /// Doc ids of each session, ascending.
  std::vector<std::vector<DocId>> sessions;
};

/// Random disjoint cover of 0..num_docs-1 with the given session fractions.
SessionSplit split_benchmark(std::size_t num_docs, const std::vector<double>& fractions, RandomSource& rng);

/// Gaussian-mixture corpus with per-document queries. The test qrels carry
/// the arrival session of each relevant document under `cfg`'s split.
ExperimentData generate_synthetic(const ExperimentConfig& cfg, bool with_tokens = false);

struct IssuedCode {
  PqCode code;
  std::uint32_t session = 0;
};

/// Everything needed to continue an experiment from a session boundary.
struct EngineState {
  ExperimentConfig config;
  std::uint32_t session = 0;
  Codebook codebook;
  std::map<DocId, IssuedCode> codes;
  DecoderParams decoder;
  std::optional<FisherDiag> fisher;
  std::optional<ProjectorParams> projector;
  /// Report blocks accumulated so far.
  nlohmann::json progress;

  DocidTrie trie() const;
};

inline constexpr std::uint32_t kStateVersion = 1;

/// "IPQS", u32 version, u64 payload size, payload, u32 CRC-32 of payload.
std::string encode_state(const EngineState& state);
EngineState decode_state(std::string_view bytes);
void save_state(const EngineState& state, const std::string& path);
EngineState load_state(const std::string& path);

/// Drives the continual-indexing protocol one session at a time.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, ExperimentData data);
  /// Continues from a saved state; `data` must be the same inputs.
  Experiment(EngineState state, ExperimentData data);

  std::size_t num_sessions() const noexcept { return split_.sessions.size(); }
  /// Sessions completed so far (0 before the base build).
  std::size_t completed() const noexcept { return completed_; }
  bool finished() const noexcept { return completed_ == num_sessions(); }

  /// Runs the next session: the base build first, then one ingest per call.
  void step();
  void run_to_end();

  const EngineState& state() const noexcept { return state_; }
  const SessionSplit& split() const noexcept { return split_; }
  const std::vector<UpdateDecision>& last_decisions() const noexcept { return last_decisions_; }
  const MemoryBank& last_bank() const noexcept { return last_bank_; }
  const std::vector<Vector>& doc_embeddings() const noexcept { return doc_emb_; }

  /// Ranked results of every test query whose document has arrived.
  ScoredRun evaluate_run() const;

  nlohmann::json report() const;

 private:
  void prepare_embeddings();
  void build_base();
  void ingest(std::uint32_t t);
  void evaluate(std::uint32_t t, nlohmann::json& block);
  std::vector<TrainingPair> doc_pairs(const std::vector<DocId>& docs) const;

  ExperimentConfig cfg_;
  ExperimentData data_;
  SessionSplit split_;
  Qrels test_qrels_;
  EngineState state_;
  std::size_t completed_ = 0;

  std::vector<Vector> doc_emb_;
  std::vector<Vector> train_q_emb_;
  std::vector<Vector> test_q_emb_;

  std::vector<UpdateDecision> last_decisions_;
  MemoryBank last_bank_;
};

/// Runs all sessions and returns the report.
nlohmann::json run_experiment(const ExperimentConfig& cfg, const ExperimentData& data);

/// Report serialised with a fixed layout (sorted keys, two-space indent).
std::string dump_report(const nlohmann::json& report);

}  // namespace ipqgr
