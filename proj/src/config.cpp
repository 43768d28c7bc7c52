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

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "ipqgr/experiment.hpp"
#include "ipqgr/io.hpp"

namespace ipqgr {

using nlohmann::json;

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"full",     "base",   "pq",          "pq-re",    "pq-dis",     "pq-dis-ad",
                                                 "pq-dis-md", "no-ewc", "no-mle-dneg", "no-mle-q", "random-bank"};
  return names;
}

VariantFlags variant_flags(const std::string& name) {
  VariantFlags f;
  if (name == "full") return f;
  if (name == "base") {
    f.memory_bank = f.bank_mle = f.pseudo_queries = f.ewc = false;
    f.threshold_mode = ThresholdMode::None;
    f.representation_learning = false;
    return f;
  }
  if (name == "pq" || name == "pq-re") {
    f.representation_learning = false;
    f.threshold_mode = ThresholdMode::None;
    f.recluster_each_session = name == "pq-re";
    return f;
  }
  if (name == "pq-dis") {
    f.threshold_mode = ThresholdMode::None;
    return f;
  }
  if (name == "pq-dis-ad") {
    f.threshold_mode = ThresholdMode::AdOnly;
    return f;
  }
  if (name == "pq-dis-md") {
    f.threshold_mode = ThresholdMode::MdOnly;
    return f;
  }
  if (name == "no-ewc") {
    f.ewc = false;
    return f;
  }
  if (name == "no-mle-dneg") {
    f.bank_mle = false;
    return f;
  }
  if (name == "no-mle-q") {
    f.pseudo_queries = false;
    return f;
  }
  if (name == "random-bank") {
    f.random_bank = true;
    return f;
  }
  throw std::invalid_argument("unknown variant: " + name);
}

void ExperimentConfig::apply_variant(const std::string& name) {
  flags = variant_flags(name);
  variant = name;
}

void ExperimentConfig::validate() const {
  if (num_groups == 0 || dim % num_groups != 0) {
    throw std::invalid_argument("config: dim " + std::to_string(dim) + " not divisible by M " + std::to_string(num_groups));
  }
  if (k == 0) throw std::invalid_argument("config: K must be at least 1");
  if (session_fractions.empty()) throw std::invalid_argument("config: no session fractions");
  double sum = 0.0;
  for (double f : session_fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("config: negative session fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("config: session fractions sum to " + std::to_string(sum));
  if (beam == 0 || top_n == 0 || metric_cutoff == 0) throw std::invalid_argument("config: beam, top_n, cutoff must be positive");
  if (metric != "mrr" && metric != "hits") throw std::invalid_argument("config: metric must be mrr or hits");
  if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be positive");
  if (lambda < 0.0 || pseudo_sigma < 0.0) throw std::invalid_argument("config: lambda and sigma must be non-negative");
  if (bank_repeats == 0) throw std::invalid_argument("config: bank_repeats must be at least 1");
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["num_groups"] = c.num_groups;
  j["k"] = c.k;
  j["kmeans_iters"] = c.kmeans_iters;
  j["repr_epochs"] = c.repr_epochs;
  j["projector_hidden"] = c.projector_hidden;
  j["tau"] = c.tau;
  j["spans_per_granularity"] = c.spans_per_granularity;
  j["span_alpha"] = c.span_alpha;
  j["span_beta"] = c.span_beta;
  j["repr_step_size"] = c.repr_step_size;
  j["repr_inner_iters"] = c.repr_inner_iters;
  j["repr_batch_size"] = c.repr_batch_size;
  j["bank_repeats"] = c.bank_repeats;
  j["pseudo_sigma"] = c.pseudo_sigma;
  j["pseudo_per_doc"] = c.pseudo_per_doc;
  j["lambda"] = c.lambda;
  j["decoder_step_size"] = c.decoder_step_size;
  j["base_steps"] = c.base_steps;
  j["session_steps"] = c.session_steps;
  j["beam"] = c.beam;
  j["top_n"] = c.top_n;
  j["metric"] = c.metric;
  j["metric_cutoff"] = c.metric_cutoff;
  j["seed"] = c.seed;
  j["session_fractions"] = c.session_fractions;
  j["setting"] = c.setting == EvalSetting::Single ? "single" : "sequential";
  j["variant"] = c.variant;
  j["flags"] = {{"memory_bank", c.flags.memory_bank},
                {"bank_mle", c.flags.bank_mle},
                {"pseudo_queries", c.flags.pseudo_queries},
                {"ewc", c.flags.ewc},
                {"threshold_mode", to_string(c.flags.threshold_mode)},
                {"recluster_each_session", c.flags.recluster_each_session},
                {"random_bank", c.flags.random_bank},
                {"representation_learning", c.flags.representation_learning}};
  j["emit_timing"] = c.emit_timing;
  const SyntheticConfig& s = c.synthetic;
  j["synthetic"] = {{"num_docs", s.num_docs},       {"num_topics", s.num_topics},
                    {"topic_scale", s.topic_scale}, {"doc_noise", s.doc_noise},
                    {"query_noise", s.query_noise}, {"train_queries_per_doc", s.train_queries_per_doc},
                    {"token_dim", s.token_dim},     {"min_tokens", s.min_tokens},
                    {"max_tokens", s.max_tokens},   {"token_noise", s.token_noise},
                    {"query_tokens", s.query_tokens}};
  return j;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out, std::set<std::string>& seen) {
  if (auto it = j.find(key); it != j.end()) {
    it->get_to(out);
    seen.insert(key);
  }
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!seen.count(it.key())) throw std::invalid_argument("config: unknown key " + where + it.key());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  std::set<std::string> seen;
  // The variant goes first so that explicit flags can override it.
  if (j.contains("variant")) {
    c.apply_variant(j.at("variant").get<std::string>());
    seen.insert("variant");
  }
  take(j, "dim", c.dim, seen);
  take(j, "num_groups", c.num_groups, seen);
  take(j, "k", c.k, seen);
  take(j, "kmeans_iters", c.kmeans_iters, seen);
  take(j, "repr_epochs", c.repr_epochs, seen);
  take(j, "projector_hidden", c.projector_hidden, seen);
  take(j, "tau", c.tau, seen);
  take(j, "spans_per_granularity", c.spans_per_granularity, seen);
  take(j, "span_alpha", c.span_alpha, seen);
  take(j, "span_beta", c.span_beta, seen);
  take(j, "repr_step_size", c.repr_step_size, seen);
  take(j, "repr_inner_iters", c.repr_inner_iters, seen);
  take(j, "repr_batch_size", c.repr_batch_size, seen);
  take(j, "bank_repeats", c.bank_repeats, seen);
  take(j, "pseudo_sigma", c.pseudo_sigma, seen);
  take(j, "pseudo_per_doc", c.pseudo_per_doc, seen);
  take(j, "lambda", c.lambda, seen);
  take(j, "decoder_step_size", c.decoder_step_size, seen);
  take(j, "base_steps", c.base_steps, seen);
  take(j, "session_steps", c.session_steps, seen);
  take(j, "beam", c.beam, seen);
  take(j, "top_n", c.top_n, seen);
  take(j, "metric", c.metric, seen);
  take(j, "metric_cutoff", c.metric_cutoff, seen);
  take(j, "seed", c.seed, seen);
  take(j, "session_fractions", c.session_fractions, seen);
  take(j, "emit_timing", c.emit_timing, seen);
  if (j.contains("setting")) {
    const auto s = j.at("setting").get<std::string>();
    if (s == "single") {
      c.setting = EvalSetting::Single;
    } else if (s == "sequential") {
      c.setting = EvalSetting::Sequential;
    } else {
      throw std::invalid_argument("config: setting must be single or sequential");
    }
    seen.insert("setting");
  }
  if (j.contains("flags")) {
    const json& f = j.at("flags");
    std::set<std::string> fs;
    take(f, "memory_bank", c.flags.memory_bank, fs);
    take(f, "bank_mle", c.flags.bank_mle, fs);
    take(f, "pseudo_queries", c.flags.pseudo_queries, fs);
    take(f, "ewc", c.flags.ewc, fs);
    take(f, "recluster_each_session", c.flags.recluster_each_session, fs);
    take(f, "random_bank", c.flags.random_bank, fs);
    take(f, "representation_learning", c.flags.representation_learning, fs);
    if (f.contains("threshold_mode")) {
      c.flags.threshold_mode = parse_threshold_mode(f.at("threshold_mode").get<std::string>());
      fs.insert("threshold_mode");
    }
    reject_unknown(f, fs, "flags.");
    seen.insert("flags");
  }
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    std::set<std::string> ss;
    SyntheticConfig& y = c.synthetic;
    take(s, "num_docs", y.num_docs, ss);
    take(s, "num_topics", y.num_topics, ss);
    take(s, "topic_scale", y.topic_scale, ss);
    take(s, "doc_noise", y.doc_noise, ss);
    take(s, "query_noise", y.query_noise, ss);
    take(s, "train_queries_per_doc", y.train_queries_per_doc, ss);
    take(s, "token_dim", y.token_dim, ss);
    take(s, "min_tokens", y.min_tokens, ss);
    take(s, "max_tokens", y.max_tokens, ss);
    take(s, "token_noise", y.token_noise, ss);
    take(s, "query_tokens", y.query_tokens, ss);
    reject_unknown(s, ss, "synthetic.");
    seen.insert("synthetic");
  }
  reject_unknown(j, seen, "");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ipqgr
