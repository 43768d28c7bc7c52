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

#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <stdexcept>

#include "ipqgr/errors.hpp"
#include "ipqgr/experiment.hpp"
#include "ipqgr/io.hpp"
#include "test_util.hpp"

namespace ipqgr {
namespace {

namespace fs = std::filesystem;

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.synthetic.num_docs = 120;
  c.synthetic.num_topics = 6;
  c.base_steps = 60;
  c.session_steps = 30;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ipqgr_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(SplitBenchmark, DefaultFractions) {
  RandomSource rng(1);
  const SessionSplit s = split_benchmark(100, {0.6, 0.1, 0.1, 0.1, 0.1}, rng);
  ASSERT_EQ(s.sessions.size(), 5u);
  const std::vector<std::size_t> expect = {60, 10, 10, 10, 10};
  std::set<DocId> seen;
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(s.sessions[t].size(), expect[t]);
    for (DocId d : s.sessions[t]) {
      EXPECT_TRUE(seen.insert(d).second);
      EXPECT_EQ(s.doc_session[d], t);
    }
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(SplitBenchmark, SingleSessionAndDeterminism) {
  RandomSource a(2), b(2);
  const SessionSplit one = split_benchmark(30, {1.0}, a);
  ASSERT_EQ(one.sessions.size(), 1u);
  EXPECT_EQ(one.sessions[0].size(), 30u);
  RandomSource c(3), d(3);
  EXPECT_EQ(split_benchmark(50, {0.5, 0.5}, c).doc_session, split_benchmark(50, {0.5, 0.5}, d).doc_session);
}

TEST(SplitBenchmark, FractionsMustSumToOne) {
  RandomSource rng(4);
  EXPECT_THROW(split_benchmark(10, {0.5, 0.4}, rng), std::invalid_argument);
  EXPECT_NO_THROW(split_benchmark(10, {0.5, 0.5 + 5e-10}, rng));
}

TEST(Embeddings, MinimalFile) {
  BinaryWriter w;
  w.bytes("EMB1");
  w.u32(2);
  w.u32(3);
  for (float f : {1.f, 2.f, 3.f, 4.f, 5.f, 6.f}) w.f32(f);
  const auto rows = decode_embeddings(w.data());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1], (Vector{{4.0, 5.0, 6.0}}));
}

TEST(Embeddings, RoundTripIsBitIdentical) {
  RandomSource rng(5);
  std::vector<Vector> rows;
  for (int i = 0; i < 17; ++i) {
    Vector v(9);
    for (int c = 0; c < 9; ++c) v[c] = static_cast<float>(rng.normal());
    rows.push_back(v);
  }
  const fs::path dir = temp_dir("emb");
  save_embeddings((dir / "x.emb").string(), rows);
  const auto back = load_embeddings((dir / "x.emb").string());
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(back[i], rows[i]);
  EXPECT_EQ(encode_embeddings(back), read_file((dir / "x.emb").string()));
}

TEST(Embeddings, TruncationAndMagicErrors) {
  std::string bytes = encode_embeddings(std::vector<Vector>{Vector::Ones(4), Vector::Zero(4)});
  bytes.resize(bytes.size() - 3);
  try {
    decode_embeddings(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 32"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 29"), std::string::npos) << msg;
    EXPECT_EQ(e.offset(), 12u);
  }
  EXPECT_THROW(decode_embeddings("EMB2\0\0\0\0"), FormatError);
}

TEST(Tokens, RoundTrip) {
  RandomSource rng(6);
  std::vector<TokenDocument> docs;
  for (std::size_t n : {1u, 5u, 3u}) {
    TokenDocument d{Matrix(static_cast<Eigen::Index>(n), 4)};
    for (Eigen::Index i = 0; i < d.tokens.size(); ++i) d.tokens.data()[i] = static_cast<float>(rng.normal());
    docs.push_back(d);
  }
  const auto back = decode_tokens(encode_tokens(docs));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i].tokens, docs[i].tokens);
  std::string bad = encode_tokens(docs);
  bad.pop_back();
  EXPECT_THROW(decode_tokens(bad), FormatError);
}

TEST(Config, JsonRoundTripAndVariants) {
  ExperimentConfig c = small_config();
  c.apply_variant("pq-dis-ad");
  c.lambda = 0.75;
  c.session_fractions = {0.5, 0.25, 0.25};
  const ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.flags.threshold_mode, ThresholdMode::AdOnly);
  EXPECT_TRUE(back.flags.representation_learning);

  EXPECT_THROW(config_from_json({{"no_such_key", 1}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"variant", "unknown"}}), std::invalid_argument);
  ExperimentConfig bad;
  bad.dim = 10;
  bad.num_groups = 4;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = ExperimentConfig{};
  bad.session_fractions = {0.7, 0.2};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Config, VariantTable) {
  EXPECT_EQ(variant_names().size(), 11u);
  const VariantFlags base = variant_flags("base");
  EXPECT_FALSE(base.memory_bank);
  EXPECT_FALSE(base.pseudo_queries);
  EXPECT_FALSE(base.ewc);
  EXPECT_TRUE(variant_flags("pq-re").recluster_each_session);
  EXPECT_TRUE(variant_flags("random-bank").random_bank);
  EXPECT_FALSE(variant_flags("no-ewc").ewc);
  EXPECT_FALSE(variant_flags("no-mle-dneg").bank_mle);
  EXPECT_FALSE(variant_flags("no-mle-q").pseudo_queries);
  EXPECT_EQ(variant_flags("pq-dis-md").threshold_mode, ThresholdMode::MdOnly);
  EXPECT_EQ(variant_flags("full").threshold_mode, ThresholdMode::Both);
}

TEST(DataDir, RoundTrip) {
  const ExperimentConfig c = small_config();
  const ExperimentData d = generate_synthetic(c);
  const fs::path dir = temp_dir("data");
  save_data_dir(dir.string(), d);
  const ExperimentData back = load_data_dir(dir.string());
  EXPECT_EQ(back.num_docs(), d.num_docs());
  EXPECT_EQ(back.test_qrels.size(), d.test_qrels.size());
  EXPECT_EQ(format_qrels(back.train_qrels), format_qrels(d.train_qrels));
  EXPECT_NEAR((back.doc_embeddings[3] - d.doc_embeddings[3]).norm(), 0.0, 1e-5);
}

TEST(Experiment, ReportShapeAndStateSizes) {
  const ExperimentConfig c = small_config();
  const nlohmann::json r = run_experiment(c, generate_synthetic(c));
  ASSERT_EQ(r["sessions"].size(), 5u);
  EXPECT_EQ(r["session_matrix"].size(), 5u);
  EXPECT_TRUE(r["continual"]["bwt"].is_number());
  EXPECT_FALSE(r.contains("timing"));
  for (std::size_t t = 1; t < 5; ++t) {
    const auto& s = r["sessions"][t];
    const auto growth = s["state_size"]["centroid_values_growth"].get<std::int64_t>();
    EXPECT_EQ(growth, s["centroids_added"].get<std::int64_t>() * static_cast<std::int64_t>(c.dim / c.num_groups));
    EXPECT_EQ(s["state_size"]["decoder_params_growth"].get<std::int64_t>(),
              s["centroids_added"].get<std::int64_t>() * static_cast<std::int64_t>(c.dim + 1));
  }
  EXPECT_DOUBLE_EQ(r["final_vert"]["mrr"].get<double>(), r["sessions"][4]["vert"]["mrr"].get<double>());
}

TEST(Experiment, SingleSessionHasNoTransfer) {
  ExperimentConfig c = small_config();
  c.session_fractions = {1.0};
  const ExperimentData d = generate_synthetic(c);
  Experiment e(c, d);
  e.run_to_end();
  const nlohmann::json r = e.report();
  EXPECT_TRUE(r["continual"]["bwt"].is_null());
  EXPECT_TRUE(r["continual"]["fwt"].is_null());
  const RunResult run = ranked_ids(e.evaluate_run());
  Qrels q;
  for (const auto& [qid, j] : d.test_qrels) q[qid] = j;
  EXPECT_DOUBLE_EQ(r["sessions"][0]["vert"]["mrr"].get<double>(), mrr_at(run, q, 10).value);
}

TEST(Experiment, ReclusterChangesOldCodes) {
  ExperimentConfig c = small_config();
  c.apply_variant("pq-re");
  const nlohmann::json r = run_experiment(c, generate_synthetic(c));
  std::int64_t changes = 0;
  for (const auto& s : r["sessions"])
    if (s.contains("old_code_changes")) changes += s["old_code_changes"].get<std::int64_t>();
  EXPECT_GT(changes, 0);
}

TEST(Experiment, TokenInputRunsRepresentationLearning) {
  ExperimentConfig c = small_config();
  c.repr_inner_iters = 3;
  c.spans_per_granularity = 1;
  const ExperimentData d = generate_synthetic(c, true);
  ASSERT_TRUE(d.has_tokens());
  Experiment e(c, d);
  e.run_to_end();
  ASSERT_TRUE(e.state().projector.has_value());
  EXPECT_EQ(e.report()["sessions"][0]["repr_mse"].size(), c.repr_epochs + 1);
}

TEST(EngineState, RoundTripAndErrors) {
  const ExperimentConfig c = small_config();
  Experiment e(c, generate_synthetic(c));
  e.step();
  e.step();
  const std::string bytes = encode_state(e.state());
  const EngineState back = decode_state(bytes);
  EXPECT_EQ(encode_state(back), bytes);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_state(bad_magic), FormatError);
  std::string newer = bytes;
  newer[4] = static_cast<char>(kStateVersion + 1);
  EXPECT_THROW(decode_state(newer), FormatError);
  std::string flipped = bytes;
  flipped[40] ^= 0x01;
  EXPECT_THROW(decode_state(flipped), CorruptionError);
  EXPECT_THROW(decode_state(bytes.substr(0, bytes.size() - 1)), FormatError);
}

TEST(EngineState, ResumeMatchesUninterruptedRun) {
  const ExperimentConfig c = small_config();
  const ExperimentData d = generate_synthetic(c);
  const std::string full = dump_report(run_experiment(c, d));

  Experiment first(c, d);
  first.step();
  first.step();
  first.step();
  const fs::path dir = temp_dir("state");
  save_state(first.state(), (dir / "s.bin").string());
  Experiment resumed(load_state((dir / "s.bin").string()), d);
  EXPECT_EQ(resumed.completed(), 3u);
  resumed.run_to_end();
  EXPECT_EQ(dump_report(resumed.report()), full);
}

TEST(Experiment, DeterministicReports) {
  const ExperimentConfig c = small_config();
  EXPECT_EQ(dump_report(run_experiment(c, generate_synthetic(c))), dump_report(run_experiment(c, generate_synthetic(c))));
}

TEST(Experiment, FinishedExperimentRefusesToStep) {
  ExperimentConfig c = small_config();
  c.session_fractions = {1.0};
  Experiment e(c, generate_synthetic(c));
  e.step();
  EXPECT_TRUE(e.finished());
  EXPECT_THROW(e.step(), InvalidStateError);
}

}  // namespace
}  // namespace ipqgr
