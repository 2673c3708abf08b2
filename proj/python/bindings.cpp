#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "guidecqr/config.hpp"
#include "guidecqr/corpus.hpp"
#include "guidecqr/embedding.hpp"
#include "guidecqr/error.hpp"
#include "guidecqr/filter.hpp"
#include "guidecqr/pipeline.hpp"
#include "guidecqr/text.hpp"
#include "guidecqr/trec.hpp"

namespace py = pybind11;
using namespace guidecqr;

namespace {

using PyRun = std::vector<std::tuple<std::string, std::string, int, double>>;
using PyQrels = std::map<std::string, std::map<std::string, int>>;

Run to_entries(const PyRun& rows) {
  Run run;
  run.reserve(rows.size());
  for (const auto& [qid, doc, rank, score] : rows) run.push_back({qid, doc, rank, score, "py"});
  return run;
}

Qrels to_qrels(const PyQrels& judgments) { return Qrels{judgments}; }

EmbeddingVector vec(std::vector<double> v) { return {std::move(v), "py"}; }

GainMode parse_gain(const std::string& name) {
  if (name == "linear") return GainMode::linear;
  if (name == "exponential") return GainMode::exponential;
  throw PreconditionError("unknown gain: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the guidecqr query reformulation pipeline";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<HttpError>(m, "HttpError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());

  m.def("tokenize", [](const std::string& s) { return tokenize(s); });
  m.def("split_sentences", [](const std::string& s) {
    std::vector<std::string> out;
    for (const auto& span : split_sentences(s)) out.emplace_back(span.text);
    return out;
  });

  py::class_<CorpusIndex, std::shared_ptr<CorpusIndex>>(m, "CorpusIndex")
      .def_static("build",
                  [](const std::vector<std::pair<std::string, std::string>>& docs) {
                    std::vector<Document> d;
                    for (const auto& [id, text] : docs) d.push_back({id, text});
                    return std::make_shared<CorpusIndex>(CorpusIndex::build(std::move(d)));
                  })
      .def_static("load",
                  [](const std::filesystem::path& p) {
                    return std::make_shared<CorpusIndex>(CorpusIndex::load(p));
                  })
      .def("save", py::overload_cast<const std::filesystem::path&>(&CorpusIndex::save,
                                                                    py::const_))
      .def_property_readonly("doc_count", &CorpusIndex::doc_count)
      .def_property_readonly("term_count", &CorpusIndex::term_count)
      .def(
          "bm25",
          [](const CorpusIndex& idx, const std::string& query, std::size_t k, double k1,
             double b) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& d : idx.bm25(query, k, Bm25Params{k1, b}))
              out.emplace_back(d.doc_id, d.score);
            return out;
          },
          py::arg("query"), py::arg("k"), py::arg("k1") = 0.9, py::arg("b") = 0.4);

  m.def(
      "embed",
      [](const std::vector<std::string>& texts, std::size_t dimension, std::uint64_t seed) {
        EmbedderSpec spec;
        spec.dimension = dimension;
        spec.seed = seed;
        std::vector<std::vector<double>> out;
        for (auto& e : embed(spec, texts)) out.push_back(std::move(e.values));
        return out;
      },
      py::arg("texts"), py::arg("dimension") = 256, py::arg("seed") = 0);
  m.def("cosine", [](const std::vector<double>& u, const std::vector<double>& v) {
    return cosine_similarity(u, v);
  });

  m.def("query_score", [](std::vector<double> q, std::vector<double> item) {
    return query_score(vec(std::move(q)), vec(std::move(item)));
  });
  m.def(
      "history_score",
      [](const std::vector<std::vector<double>>& history, std::vector<double> item,
         const std::string& aggregation) {
        std::vector<EmbeddingVector> h;
        for (const auto& x : history) h.push_back(vec(x));
        return history_score(h, vec(std::move(item)), parse_history_aggregation(aggregation));
      },
      py::arg("history"), py::arg("item"), py::arg("aggregation") = "max_distance");
  m.def("filter_score", &filter_score, py::arg("query_score"), py::arg("history_score"));

  m.def(
      "mrr",
      [](const PyRun& run, const PyQrels& qrels, int rel_threshold) {
        return mrr(to_entries(run), to_qrels(qrels), rel_threshold);
      },
      py::arg("run"), py::arg("qrels"), py::arg("rel_threshold") = 1);
  m.def(
      "ndcg",
      [](const PyRun& run, const PyQrels& qrels, std::size_t k, const std::string& gain) {
        return ndcg_at_k(to_entries(run), to_qrels(qrels), k, parse_gain(gain));
      },
      py::arg("run"), py::arg("qrels"), py::arg("k") = 3, py::arg("gain") = "linear");

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def_static("defaults", &PipelineConfig::defaults)
      .def_static("load", &PipelineConfig::load)
      .def_static("parse", &PipelineConfig::parse, py::arg("toml_text"),
                  py::arg("base_dir") = std::filesystem::path{})
      .def("to_toml", &PipelineConfig::to_toml)
      .def("validate", &PipelineConfig::validate)
      .def_readwrite("name", &PipelineConfig::name)
      .def_readwrite("output_dir", &PipelineConfig::output_dir)
      .def_readwrite("guided_n", &PipelineConfig::guided_n)
      .def_readwrite("intermediate_keep", &PipelineConfig::intermediate_keep)
      .def_readwrite("final_keep", &PipelineConfig::final_keep)
      .def_readwrite("filter_threshold", &PipelineConfig::filter_threshold)
      .def_readwrite("workers", &PipelineConfig::workers)
      .def_property(
          "keyword_top_docs", [](const PipelineConfig& c) { return c.enrichment.keyword_top_docs; },
          [](PipelineConfig& c, std::size_t v) { c.enrichment.keyword_top_docs = v; })
      .def_property(
          "keyword_span", [](const PipelineConfig& c) { return c.enrichment.keyword_span; },
          [](PipelineConfig& c, std::size_t v) { c.enrichment.keyword_span = v; })
      .def_property(
          "answer_top_docs", [](const PipelineConfig& c) { return c.enrichment.answer_top_docs; },
          [](PipelineConfig& c, std::size_t v) { c.enrichment.answer_top_docs = v; });

  m.def(
      "cmd_index",
      [](const PipelineConfig& cfg) {
        IndexSummary s;
        {
          py::gil_scoped_release release;
          s = cmd_index(cfg);
        }
        py::dict d;
        d["index_file"] = s.index_file;
        d["doc_count"] = s.doc_count;
        d["term_count"] = s.term_count;
        return d;
      });
  m.def("cmd_reformulate", [](const PipelineConfig& cfg) {
    ReformulateSummary s;
    {
      py::gil_scoped_release release;
      s = cmd_reformulate(cfg);
    }
    py::dict d;
    d["turns"] = s.turns;
    d["failed"] = s.failed;
    d["failures"] = s.failures;
    d["kept_items"] = s.kept_items;
    d["dropped_items"] = s.dropped_items;
    d["exit_code"] = s.exit_code();
    return d;
  });
  m.def(
      "cmd_evaluate_json",
      [](const PipelineConfig& cfg, std::optional<std::filesystem::path> run,
         std::optional<std::filesystem::path> baseline) {
        py::gil_scoped_release release;
        return cmd_evaluate(cfg, run, baseline).dump();
      },
      py::arg("config"), py::arg("run") = py::none(), py::arg("baseline") = py::none());
  m.def("cmd_sweep", [](const PipelineConfig& cfg, const std::string& axis,
                        const std::vector<double>& values) {
    SweepReport rep;
    {
      py::gil_scoped_release release;
      rep = cmd_sweep(cfg, parse_sweep_axis(axis), values);
    }
    py::list rows;
    for (const auto& r : rep.rows) {
      py::dict d;
      d["value"] = r.value;
      d["ok"] = r.ok;
      d["error"] = r.error;
      d["mrr"] = r.mrr;
      d["ndcg"] = r.ndcg;
      d["baseline_mrr"] = r.baseline_mrr;
      d["baseline_ndcg"] = r.baseline_ndcg;
      d["kept_items"] = r.kept_items;
      d["dropped_items"] = r.dropped_items;
      d["failed_turns"] = r.failed_turns;
      rows.append(d);
    }
    return rows;
  });
}
