#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "guidecqr/config.hpp"
#include "guidecqr/error.hpp"
#include "guidecqr/pipeline.hpp"
#include "oracles.hpp"

using namespace guidecqr;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = GCQR_FIXTURE_DIR;

PipelineConfig fixture_config(const std::string& work) {
  auto cfg = PipelineConfig::load(kFixtures / "fixture.toml");
  cfg.output_dir = fs::path(GCQR_WORK_DIR) / "pipeline" / work;
  fs::remove_all(cfg.output_dir);
  return cfg;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

fs::path write_file(const fs::path& p, const std::string& body) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("defaults and validation") {
    auto cfg = PipelineConfig::defaults();
    CHECK(cfg.guided_n == 2000);
    CHECK(cfg.intermediate_keep == 100);
    CHECK(cfg.final_keep == 10);
    CHECK(cfg.filter_threshold == 1.19);
    CHECK(cfg.history_aggregation == HistoryAggregation::max_distance);
    CHECK(cfg.evaluation.rel_threshold == 1);
    CHECK(cfg.evaluation.ndcg_k == 3);
    CHECK(cfg.embedders.size() == 5);
    CHECK(cfg.embedder("rerank1").provider_id() != cfg.embedder("rerank2").provider_id());
    CHECK(cfg.embedder("dense") == cfg.embedder("rerank1"));

    auto bad = cfg;
    bad.embedders.erase("filter");
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad = cfg;
    bad.intermediate_keep = 5;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    CHECK_THROWS_AS(PipelineConfig::parse("[retrieval]\nguided_n = \"many\"\n"), ParseError);
    CHECK_THROWS_AS(PipelineConfig::parse("[filter\n"), ParseError);
    CHECK_THROWS_AS(PipelineConfig::parse("[embedders.rerank1]\nkind = \"http\"\n"),
                    PreconditionError);
  }

  TEST_CASE("config TOML round-trip") {
    auto cfg = PipelineConfig::load(kFixtures / "fixture.toml");
    cfg.rewriter_endpoint = "http://localhost:9/rw";
    cfg.extractor.kind = ExtractorKind::http;
    cfg.extractor.endpoint = "http://localhost:9/qa";
    cfg.embedders["rerank2"].kind = EmbedderKind::http;
    cfg.embedders["rerank2"].endpoint = "http://localhost:9";
    cfg.embedders["rerank2"].model_name = "ember-v1";
    cfg.history_aggregation = HistoryAggregation::min_distance;
    cfg.evaluation.gain = GainMode::exponential;
    cfg.enrichment.ngram_range = {1, 2};
    auto back = PipelineConfig::parse(cfg.to_toml());
    CHECK(back == cfg);
    CHECK(back.to_toml() == cfg.to_toml());
  }

  TEST_CASE("presets carry the tuned operating points") {
    auto c19 = PipelineConfig::load(fs::path(GCQR_CONFIG_DIR) / "cast19.toml");
    CHECK(c19.guided_n == 2000);
    CHECK(c19.final_keep == 10);
    CHECK(c19.enrichment.keyword_top_docs == 4);
    CHECK(c19.enrichment.keyword_span == 15);
    CHECK(c19.enrichment.answer_top_docs == 6);
    CHECK(c19.filter_threshold == 1.19);
    CHECK(c19.evaluation.rel_threshold == 1);
    auto c20 = PipelineConfig::load(fs::path(GCQR_CONFIG_DIR) / "cast20.toml");
    CHECK(c20.enrichment.keyword_top_docs == 5);
    CHECK(c20.enrichment.keyword_span == 5);
    CHECK(c20.enrichment.answer_top_docs == 4);
    CHECK(c20.filter_threshold == 0.525);
    CHECK(c20.evaluation.rel_threshold == 2);
  }

  TEST_CASE("cmd_index writes a stable index") {
    auto cfg = fixture_config("index");
    auto s = cmd_index(cfg);
    CHECK(s.doc_count == 50);
    const auto first = oracle::slurp(s.index_file);
    CHECK(first.rfind("GCQR-IDX-1\n", 0) == 0);
    cmd_index(cfg);
    CHECK(oracle::slurp(s.index_file) == first);

    auto missing = cfg;
    missing.corpus_path = kFixtures / "no-such-corpus.jsonl";
    try {
      cmd_index(missing);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("no-such-corpus.jsonl") != std::string::npos);
    }
    CHECK_THROWS_AS(cmd_reformulate(missing), Error);
  }

  TEST_CASE("threshold 0 keeps every augmented keyword") {
    auto cfg = fixture_config("th0");
    cfg.filter_threshold = 0.0;
    auto s = cmd_reformulate(cfg);
    CHECK(s.failed == 0);
    CHECK(s.dropped_items == 0);
    REQUIRE(s.results.size() == 6);
    for (const auto& r : s.results) {
      CHECK(!r.keywords.empty());
      for (const auto& k : r.keywords)
        CHECK(r.reformulated.final_text.find(k.text) != std::string::npos);
      CHECK(r.reformulated.kept_answer == r.unified_answer);
      CHECK(r.guided.size() <= cfg.final_keep);
      CHECK(r.keywords.size() <= cfg.enrichment.keyword_top_docs * cfg.enrichment.keyword_span);
      CHECK(r.reformulated.final_text.rfind(r.turn.baseline_query, 0) == 0);
    }
    for (const char* f : {kReformulatedFile, kEnrichmentFile, kBaselineRunFile, kFinalRunFile,
                          kGuidedStage1RunFile, kGuidedRunFile})
      CHECK(fs::exists(cfg.output_dir / f));
    CHECK(read_jsonl(cfg.output_dir / kReformulatedFile).size() == 6);
  }

  TEST_CASE("enrichment disabled: final run equals baseline run") {
    auto cfg = fixture_config("noenrich");
    cfg.enrichment.keyword_top_docs = 0;
    cfg.enrichment.answer_top_docs = 0;
    auto s = cmd_reformulate(cfg);
    for (const auto& r : s.results) {
      CHECK(r.reformulated.final_text == r.turn.baseline_query);
      REQUIRE(r.final_run.size() == r.baseline_run.size());
      for (std::size_t i = 0; i < r.final_run.size(); ++i) {
        CHECK(r.final_run[i].doc_id == r.baseline_run[i].doc_id);
        CHECK(r.final_run[i].score == r.baseline_run[i].score);
      }
    }
  }

  TEST_CASE("output does not depend on worker count") {
    auto one = fixture_config("w1");
    one.workers = 1;
    auto many = fixture_config("w4");
    many.workers = 4;
    cmd_reformulate(one);
    cmd_reformulate(many);
    for (const char* f : {kReformulatedFile, kEnrichmentFile, kBaselineRunFile, kFinalRunFile})
      CHECK(oracle::slurp(one.output_dir / f) == oracle::slurp(many.output_dir / f));
  }

  TEST_CASE("a failing turn is skipped and reported as partial") {
    auto cfg = fixture_config("partial");
    cfg.queries_path = write_file(
        cfg.output_dir / "in" / "queries.jsonl",
        "{\"conversation_id\":\"31\",\"turn_id\":1,\"raw_query\":\"What is throat cancer?\","
        "\"baseline_query\":\"What is throat cancer?\",\"history\":[]}\n"
        "{\"conversation_id\":\"31\",\"turn_id\":2,\"raw_query\":\"?\","
        "\"baseline_query\":\"?!\",\"history\":[\"What is throat cancer?\"]}\n");
    auto s = cmd_reformulate(cfg);
    CHECK(s.turns == 2);
    CHECK(s.failed == 1);
    CHECK(s.exit_code() == kExitPartial);
    REQUIRE(s.failures.size() == 1);
    CHECK(s.failures[0].rfind("31_2", 0) == 0);
    CHECK(read_jsonl(cfg.output_dir / kReformulatedFile).size() == 1);
  }

  TEST_CASE("missing baselines go through the rewriter, then fall back to the raw query") {
    httplib::Server server;
    server.Post("/rewrite", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      const auto raw = body["raw_query"].get<std::string>();
      if (raw == "fail") {
        res.status = 500;
        return;
      }
      res.set_content(nlohmann::json{{"baseline_query", "rewritten " + raw}}.dump(),
                      "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto cfg = fixture_config("rewriter");
    auto index = load_or_build_index(cfg);
    Pipeline plain(cfg, index);
    ConversationTurn t{"49", 2, "Who are its competitors?", "", {"What is Netflix?"}};
    CHECK(plain.prepare(t).baseline_query == "Who are its competitors?");

    cfg.rewriter_endpoint = "http://127.0.0.1:" + std::to_string(port);
    Pipeline hooked(cfg, index);
    CHECK(hooked.prepare(t).baseline_query == "rewritten Who are its competitors?");
    t.raw_query = "fail";
    CHECK(hooked.prepare(t).baseline_query == "fail");
    t.baseline_query = "kept as is";
    CHECK(hooked.prepare(t).baseline_query == "kept as is");
    server.stop();
    th.join();
  }

  TEST_CASE("evaluate reports both runs, deltas and keyword precision") {
    auto cfg = fixture_config("eval");
    cmd_reformulate(cfg);
    auto m = cmd_evaluate(cfg);
    CHECK(m.contains("MRR"));
    CHECK(m.contains("NDCG@3"));
    CHECK(m["evaluated_queries"] == 6);
    CHECK(m["per_query"].size() == 6);
    REQUIRE(m.contains("baseline"));
    CHECK(m["delta"]["MRR"].get<double>() ==
          doctest::Approx(m["MRR"].get<double>() - m["baseline"]["MRR"].get<double>()));
    REQUIRE(m.contains("keyword_precision"));
    CHECK(m["keyword_precision"]["evaluated_queries"] == 6);
    CHECK(fs::exists(cfg.output_dir / kMetricsFile));
  }

  TEST_CASE("evaluate with disjoint query ids") {
    auto cfg = fixture_config("disjoint");
    cmd_reformulate(cfg);
    cfg.qrels_path = write_file(cfg.output_dir / "other.qrels", "99_1 0 c01 4\n");
    auto m = cmd_evaluate(cfg);
    CHECK(m["evaluated_queries"] == 0);
    CHECK(m.contains("warning"));
    CHECK(m["run_only_queries"].size() == 6);
    auto none = cfg;
    none.qrels_path.reset();
    CHECK_THROWS_AS(cmd_evaluate(none), Error);
  }

  TEST_CASE("threshold sweep: four rows, kept counts non-increasing") {
    auto cfg = fixture_config("sweep");
    auto report = cmd_sweep(cfg, SweepAxis::filter_threshold, {0, 0.525, 1.19, 5});
    REQUIRE(report.rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(report.rows[i].ok);
      if (i) CHECK(report.rows[i].kept_items <= report.rows[i - 1].kept_items);
      CHECK(report.rows[i].kept_items + report.rows[i].dropped_items ==
            report.rows[0].kept_items);
    }
    CHECK(fs::exists(report.csv_path));
    CHECK(fs::exists(report.json_path));
    const auto csv = oracle::slurp(report.csv_path);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(fs::exists(cfg.output_dir / "sweep" / "filter_threshold" / "0.525" / kFinalRunFile));
  }

  TEST_CASE("sweep records bad values and continues") {
    auto cfg = fixture_config("sweep-bad");
    auto report = cmd_sweep(cfg, SweepAxis::keyword_span, {0, 3});
    REQUIRE(report.rows.size() == 2);
    CHECK_FALSE(report.rows[0].ok);
    CHECK(!report.rows[0].error.empty());
    CHECK(report.rows[1].ok);
    CHECK_THROWS_AS(parse_sweep_axis("span"), PreconditionError);
    CHECK(parse_sweep_axis("guided_n") == SweepAxis::guided_n);
    CHECK_THROWS_AS(cmd_sweep(cfg, SweepAxis::guided_n, {}), PreconditionError);
  }

  TEST_CASE("golden runs score as frozen by the independent metrics script") {
    auto cfg = fixture_config("golden-metrics");
    const auto golden = kFixtures / "golden";
    const auto frozen = nlohmann::json::parse(oracle::slurp(golden / "metrics.json"));
    const auto got = cmd_evaluate(cfg, golden / "guidecqr.run", golden / "baseline.run");
    for (const auto& [key, ours] :
         {std::pair{"guidecqr", got}, std::pair{"baseline", got["baseline"]}}) {
      CAPTURE(key);
      CHECK(ours["MRR"].get<double>() == doctest::Approx(frozen[key]["MRR"].get<double>()).epsilon(1e-12));
      CHECK(ours["NDCG@3"].get<double>() ==
            doctest::Approx(frozen[key]["NDCG@3"].get<double>()).epsilon(1e-12));
      CHECK(ours["evaluated_queries"] == frozen[key]["evaluated_queries"]);
    }
  }
}
