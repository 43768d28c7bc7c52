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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ipqgr/codebook.hpp"
#include "ipqgr/decoder.hpp"
#include "ipqgr/errors.hpp"
#include "ipqgr/experiment.hpp"
#include "ipqgr/ipq_update.hpp"
#include "ipqgr/metrics.hpp"

namespace py = pybind11;
using namespace ipqgr;

namespace {

PqCode to_code(const std::vector<std::uint32_t>& v) { return PqCode{v}; }

Qrels to_qrels(const std::map<QueryId, DocId>& q) {
  Qrels out;
  for (const auto& [qid, doc] : q) out[qid] = Judgment{doc, 0};
  return out;
}

ExperimentConfig config_from_string(const std::string& text) {
  ExperimentConfig c = config_from_json(nlohmann::json::parse(text));
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Incremental product quantization with generative retrieval";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CorruptionError>(m, "CorruptionError", PyExc_ValueError);
  py::register_exception<InvalidStateError>(m, "InvalidStateError", PyExc_RuntimeError);

  py::class_<RandomSource>(m, "RandomSource").def(py::init<std::uint64_t>(), py::arg("seed"));

  py::class_<Codebook>(m, "Codebook")
      .def_property_readonly("dim", &Codebook::dim)
      .def_property_readonly("num_groups", &Codebook::num_groups)
      .def_property_readonly("sub_dim", &Codebook::sub_dim)
      .def_property_readonly("session", &Codebook::session)
      .def("group_sizes", &Codebook::group_sizes)
      .def("total_centroids", &Codebook::total_centroids)
      .def("centroid", [](const Codebook& cb, std::size_t g, std::size_t k) { return cb.group(g).clusters.at(k).centroid; })
      .def("cluster_members", [](const Codebook& cb, std::size_t g, std::size_t k) { return cb.group(g).clusters.at(k).members; })
      .def("valid", [](const Codebook& cb, const std::vector<std::uint32_t>& c) { return cb.valid(to_code(c)); });

  m.def(
      "build_base_codebook",
      [](const std::vector<Vector>& embeddings, std::size_t num_groups, std::size_t k, std::uint64_t seed) {
        RandomSource rng(seed);
        BaseCodebook b = build_base_codebook(embeddings, num_groups, k, rng);
        std::vector<std::vector<std::uint32_t>> codes;
        for (const PqCode& c : b.codes) codes.push_back(c.indices);
        return std::make_pair(std::move(b.codebook), std::move(codes));
      },
      py::arg("embeddings"), py::arg("num_groups"), py::arg("k"), py::arg("seed") = 0);
  m.def("quantize", [](const Vector& x, const Codebook& cb) { return quantize(x, cb).indices; });
  m.def("reconstruct", [](const std::vector<std::uint32_t>& c, const Codebook& cb) { return reconstruct(to_code(c), cb); });
  m.def("quantization_error", &quantization_error);

  m.def(
      "ingest_session",
      [](Codebook& cb, const std::vector<std::pair<DocId, Vector>>& docs, std::uint32_t session, std::uint64_t seed,
         const std::string& mode) {
        RandomSource rng(seed);
        IngestResult r = ingest_session(cb, docs, session, rng, parse_threshold_mode(mode));
        std::vector<std::pair<DocId, std::vector<std::uint32_t>>> codes;
        for (auto& [doc, code] : r.codes) codes.emplace_back(doc, code.indices);
        std::vector<std::string> log;
        for (const auto& d : r.log) log.push_back(d.to_record());
        return std::make_pair(codes, log);
      },
      py::arg("codebook"), py::arg("docs"), py::arg("session"), py::arg("seed") = 0, py::arg("mode") = "both",
      "Ingests (doc_id, embedding) pairs in place; returns (codes, decision records).");
  m.def(
      "classify",
      [](double dist, double ad, double md) { return std::string(to_string(classify(dist, Thresholds{ad, md}))); },
      py::arg("dist"), py::arg("ad"), py::arg("md"));

  m.def(
      "mrr_at",
      [](const RunResult& run, const std::map<QueryId, DocId>& qrels, std::size_t n) {
        return mrr_at(run, to_qrels(qrels), n).value;
      },
      py::arg("run"), py::arg("qrels"), py::arg("n") = 10);
  m.def(
      "hits_at",
      [](const RunResult& run, const std::map<QueryId, DocId>& qrels, std::size_t n) {
        return hits_at(run, to_qrels(qrels), n).value;
      },
      py::arg("run"), py::arg("qrels"), py::arg("n") = 10);
  m.def(
      "continual_metrics",
      [](const std::vector<std::vector<double>>& rows) {
        SessionMatrix sm(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t)
          for (std::size_t i = 0; i < rows[t].size(); ++i) sm.set(t, i, rows[t][i]);
        const ContinualMetrics c = continual_metrics(sm);
        return py::dict(py::arg("ap") = c.ap, py::arg("bwt") = c.bwt, py::arg("fwt") = c.fwt);
      },
      py::arg("matrix"), "Lower-triangular performance matrix, one row per session.");

  m.def("variant_names", &variant_names);
  m.def(
      "default_config", [] { return config_to_json(ExperimentConfig{}).dump(); },
      "Default configuration as a JSON string.");
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig c = config_from_string(config_json);
        return dump_report(run_experiment(c, generate_synthetic(c)));
      },
      py::arg("config_json"), "Runs the full protocol on synthetic data; returns the report as JSON text.");

  py::class_<Experiment>(m, "Experiment")
      .def(py::init([](const std::string& config_json) {
             const ExperimentConfig c = config_from_string(config_json);
             return Experiment(c, generate_synthetic(c));
           }),
           py::arg("config_json"))
      .def_property_readonly("num_sessions", &Experiment::num_sessions)
      .def_property_readonly("completed", &Experiment::completed)
      .def_property_readonly("finished", &Experiment::finished)
      .def("step", &Experiment::step)
      .def("run_to_end", &Experiment::run_to_end)
      .def("report", [](const Experiment& e) { return dump_report(e.report()); })
      .def("codes", [](const Experiment& e) {
        std::map<DocId, std::vector<std::uint32_t>> out;
        for (const auto& [doc, issued] : e.state().codes) out[doc] = issued.code.indices;
        return out;
      })
      .def("save_state", [](const Experiment& e, const std::string& path) { save_state(e.state(), path); });
}
