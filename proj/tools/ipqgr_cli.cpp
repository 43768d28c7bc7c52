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

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "ipqgr/errors.hpp"
#include "ipqgr/experiment.hpp"
#include "ipqgr/io.hpp"

namespace {

using namespace ipqgr;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kInvalidArgument = 3,
  kFormat = 4,
  kCorruption = 5,
  kInvalidState = 6,
  kIo = 7,
};

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool out_required) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--variant", o.variant, "Model variant")->check(CLI::IsMember(variant_names()));
  auto* out = cmd->add_option("--out", o.out, "Output path");
  if (out_required) out->required();
}

ExperimentConfig resolve_config(const CommonOpts& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.variant.empty()) cfg.apply_variant(o.variant);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

// Inputs either from a data directory or generated from the config.
ExperimentData resolve_data(const ExperimentConfig& cfg, const std::string& dir, bool tokens) {
  if (!dir.empty()) return load_data_dir(dir);
  return generate_synthetic(cfg, tokens);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::string decisions_tsv(const std::vector<UpdateDecision>& log) {
  std::string out;
  for (const auto& d : log) out += d.to_record() + "\n";
  return out;
}

std::string bank_tsv(const MemoryBank& bank) {
  std::string out;
  for (const auto& e : bank.entries) out += e.to_record() + "\n";
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Continual generative retrieval with incremental product quantization"};
  app.require_subcommand(1);

  CommonOpts gen_o;
  bool gen_tokens = false;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus to a data directory");
  add_common(gen, gen_o, true);
  gen->add_flag("--tokens", gen_tokens, "Emit token sequences instead of embeddings");

  CommonOpts base_o;
  std::string base_data;
  bool base_tokens = false;
  auto* base = app.add_subcommand("build-base", "Build the base codebook and decoder, save the engine state");
  add_common(base, base_o, true);
  base->add_option("--data", base_data, "Data directory (synthetic corpus if omitted)");
  base->add_flag("--tokens", base_tokens, "Use a synthetic token corpus");

  std::string ing_state, ing_data, ing_out, ing_decisions, ing_bank;
  bool ing_tokens = false;
  auto* ing = app.add_subcommand("ingest", "Run the next session on a saved engine state");
  ing->add_option("--state", ing_state, "Engine state to continue")->required();
  ing->add_option("--data", ing_data, "Data directory used to build the state");
  ing->add_flag("--tokens", ing_tokens, "Use a synthetic token corpus");
  ing->add_option("--out", ing_out, "Path of the updated state")->required();
  ing->add_option("--decisions-out", ing_decisions, "Write the update decision log (TSV)");
  ing->add_option("--bank-out", ing_bank, "Write the memory bank (TSV)");

  std::string ev_state, ev_data, ev_run, ev_qrels, ev_out, ev_metric = "mrr";
  std::size_t ev_cutoff = 10;
  bool ev_tokens = false;
  auto* ev = app.add_subcommand("evaluate", "Retrieve with a saved state, or score a run file");
  ev->add_option("--state", ev_state, "Engine state to retrieve with");
  ev->add_option("--data", ev_data, "Data directory used to build the state");
  ev->add_flag("--tokens", ev_tokens, "Use a synthetic token corpus");
  ev->add_option("--run", ev_run, "Run TSV to score");
  ev->add_option("--qrels", ev_qrels, "Qrels TSV to score against");
  ev->add_option("--metric", ev_metric, "mrr or hits")->check(CLI::IsMember({"mrr", "hits"}));
  ev->add_option("--cutoff", ev_cutoff, "Rank cutoff");
  ev->add_option("--out", ev_out, "Output path (stdout if omitted)");

  CommonOpts run_o;
  std::string run_data, run_resume, run_state_out;
  std::optional<std::size_t> run_stop;
  bool run_tokens = false;
  auto* run = app.add_subcommand("run", "Run the full session protocol and write the report");
  add_common(run, run_o, false);
  run->add_option("--data", run_data, "Data directory (synthetic corpus if omitted)");
  run->add_flag("--tokens", run_tokens, "Use a synthetic token corpus");
  run->add_option("--resume", run_resume, "Continue from a saved engine state");
  run->add_option("--stop-after", run_stop, "Stop after this many sessions");
  run->add_option("--state-out", run_state_out, "Save the engine state when stopping");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (gen->parsed()) {
    const ExperimentConfig cfg = resolve_config(gen_o);
    save_data_dir(gen_o.out, generate_synthetic(cfg, gen_tokens));
  } else if (base->parsed()) {
    const ExperimentConfig cfg = resolve_config(base_o);
    Experiment e(cfg, resolve_data(cfg, base_data, base_tokens));
    e.step();
    save_state(e.state(), base_o.out);
  } else if (ing->parsed()) {
    EngineState st = load_state(ing_state);
    const ExperimentConfig cfg = st.config;
    Experiment e(std::move(st), resolve_data(cfg, ing_data, ing_tokens));
    e.step();
    save_state(e.state(), ing_out);
    if (!ing_decisions.empty()) write_text(ing_decisions, decisions_tsv(e.last_decisions()));
    if (!ing_bank.empty()) write_text(ing_bank, bank_tsv(e.last_bank()));
  } else if (ev->parsed()) {
    if (!ev_state.empty()) {
      EngineState st = load_state(ev_state);
      const ExperimentConfig cfg = st.config;
      Experiment e(std::move(st), resolve_data(cfg, ev_data, ev_tokens));
      write_text(ev_out, format_run(e.evaluate_run()));
    } else if (!ev_run.empty() && !ev_qrels.empty()) {
      const RunResult r = ranked_ids(parse_run(read_file(ev_run)));
      const Qrels q = load_qrels(ev_qrels);
      const MetricValue v = ev_metric == "hits" ? hits_at(r, q, ev_cutoff) : mrr_at(r, q, ev_cutoff);
      nlohmann::json j = {{"metric", ev_metric + "@" + std::to_string(ev_cutoff)},
                          {"value", v.value},
                          {"evaluated", v.evaluated},
                          {"skipped", v.skipped}};
      write_text(ev_out, j.dump(2) + "\n");
    } else {
      throw std::invalid_argument("evaluate needs --state, or both --run and --qrels");
    }
  } else if (run->parsed()) {
    std::optional<Experiment> e;
    if (!run_resume.empty()) {
      if (!run_o.config.empty() || run_o.seed || !run_o.variant.empty()) {
        throw std::invalid_argument("--resume takes its config from the saved state");
      }
      EngineState st = load_state(run_resume);
      const ExperimentConfig cfg = st.config;
      e.emplace(std::move(st), resolve_data(cfg, run_data, run_tokens));
    } else {
      const ExperimentConfig cfg = resolve_config(run_o);
      e.emplace(cfg, resolve_data(cfg, run_data, run_tokens));
    }
    while (!e->finished() && (!run_stop || e->completed() < *run_stop)) e->step();
    if (!run_state_out.empty()) save_state(e->state(), run_state_out);
    write_text(run_o.out, dump_report(e->report()));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error[invalid-argument]: " << e.what() << "\n";
    return kInvalidArgument;
  } catch (const ipqgr::FormatError& e) {
    std::cerr << "error[format]: " << e.what() << "\n";
    return kFormat;
  } catch (const ipqgr::CorruptionError& e) {
    std::cerr << "error[corruption]: " << e.what() << "\n";
    return kCorruption;
  } catch (const ipqgr::InvalidStateError& e) {
    std::cerr << "error[invalid-state]: " << e.what() << "\n";
    return kInvalidState;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error[format]: " << e.what() << "\n";
    return kFormat;
  } catch (const std::runtime_error& e) {
    std::cerr << "error[io]: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
