#include "guidecqr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"
#include "http_json.hpp"

namespace guidecqr {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kBaselineTag = "baseline";
constexpr const char* kFinalTag = "guidecqr";
constexpr const char* kGuidedStage1Tag = "guided-stage1";
constexpr const char* kGuidedTag = "guided-final";

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

ojson keyword_json(const KeywordCandidate& k) {
  ojson j;
  j["text"] = k.text;
  j["source_doc"] = k.source_doc;
  j["score"] = k.score;
  return j;
}

ojson enrichment_json(const TurnResult& r) {
  ojson j;
  j["conversation_id"] = r.turn.conversation_id;
  j["turn_id"] = r.turn.turn_id;
  ojson keywords = ojson::array();
  for (const auto& k : r.keywords) keywords.push_back(keyword_json(k));
  j["keywords"] = std::move(keywords);
  ojson answers = ojson::array();
  for (const auto& a : r.answers) {
    ojson aj;
    aj["text"] = a.text;
    aj["source_doc"] = a.source_doc;
    aj["score"] = a.score;
    answers.push_back(std::move(aj));
  }
  j["answers"] = std::move(answers);
  j["unified_answer"] = r.unified_answer;
  ojson kept = ojson::array();
  for (const auto& item : r.filtered.kept) {
    ojson kj;
    kj["text"] = item.text;
    kj["kind"] = to_string(item.kind);
    kj["filter_score"] = item.filter_score.value_or(0.0);
    kept.push_back(std::move(kj));
  }
  j["kept"] = std::move(kept);
  return j;
}

std::size_t resolve_workers(std::size_t configured, std::size_t jobs) {
  std::size_t n = configured;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

std::size_t as_count(double value, std::size_t min, const char* what) {
  if (!std::isfinite(value) || value < static_cast<double>(min) ||
      value != std::floor(value))
    throw PreconditionError(std::string(what) + " needs an integer >= " +
                            std::to_string(min) + ", got " + format_number(value));
  return static_cast<std::size_t>(value);
}

ojson precision_report(const fs::path& enrichment_path, const Qrels& qrels,
                       const CorpusIndex& doc_table) {
  std::ifstream in(enrichment_path);
  if (!in) throw Error("cannot open " + enrichment_path.string());
  ojson per_query = ojson::object();
  double sum = 0.0;
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto row = nlohmann::json::parse(line);
    ConversationTurn key;
    const auto& cid = row.at("conversation_id");
    key.conversation_id = cid.is_string() ? cid.get<std::string>() : cid.dump();
    key.turn_id = row.at("turn_id").get<int>();
    const std::string qid = key.qid();
    if (!qrels.contains(qid)) continue;
    std::vector<KeywordCandidate> keywords;
    for (const auto& k : row.at("keywords"))
      keywords.push_back({k.at("text").get<std::string>(), k.value("source_doc", ""), 0.0});
    const Precision p = keyword_precision_counts(keywords, qrels, qid, doc_table);
    ojson q;
    q["matched"] = p.matched;
    q["total"] = p.total;
    q["precision"] = p.value();
    per_query[qid] = std::move(q);
    sum += p.value();
    ++n;
  }
  ojson out;
  out["mean"] = n == 0 ? 0.0 : sum / static_cast<double>(n);
  out["evaluated_queries"] = n;
  out["per_query"] = std::move(per_query);
  return out;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// --- Pipeline ---------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<const CorpusIndex> index)
    : config_(std::move(config)), index_(std::move(index)) {
  config_.validate();
  // Stages sharing a spec share one memoised provider.
  std::map<std::string, std::shared_ptr<const Embedder>> by_provider;
  auto bind = [&](std::string_view stage) {
    const EmbedderSpec& spec = config_.embedder(stage);
    auto& shared = by_provider[spec.provider_id()];
    if (!shared) shared = make_embedder(spec);
    embedders_.emplace(std::string(stage), shared);
  };
  for (auto stage : kEmbedderStages) bind(stage);

  if (config_.retriever == RetrieverKind::dense) {
    bind(kDenseStage);
    retriever_ = std::make_unique<DenseRetriever>(*index_, embedders_.at(std::string(kDenseStage)));
  } else {
    retriever_ = std::make_unique<Bm25Retriever>(*index_, config_.bm25);
  }
  extractor_ = make_extractor(config_.extractor, embedders_.at("answer"));
  spdlog::debug("keyword span read as a per-document keyword count, ngram_range [{}, {}]",
                config_.enrichment.ngram_range.low, config_.enrichment.ngram_range.high);
}

const Embedder& Pipeline::embedder(std::string_view stage) const {
  auto it = embedders_.find(stage);
  if (it == embedders_.end())
    throw PreconditionError("no embedder bound for stage \"" + std::string(stage) + "\"");
  return *it->second;
}

ConversationTurn Pipeline::prepare(ConversationTurn turn) const {
  if (!trim(turn.baseline_query).empty()) return turn;
  if (config_.rewriter_endpoint) {
    try {
      nlohmann::json body{{"conversation_id", turn.conversation_id},
                          {"turn_id", turn.turn_id},
                          {"raw_query", turn.raw_query},
                          {"history", turn.history}};
      auto reply = detail::post_json(*config_.rewriter_endpoint, "/rewrite", body, {1, 100, 10});
      if (reply.contains("baseline_query") && reply["baseline_query"].is_string())
        turn.baseline_query = reply["baseline_query"].get<std::string>();
    } catch (const Error& e) {
      spdlog::warn("rewriter failed for {}: {}; using the raw query", turn.qid(), e.what());
    }
  }
  if (trim(turn.baseline_query).empty()) turn.baseline_query = turn.raw_query;
  if (trim(turn.baseline_query).empty())
    throw PreconditionError("turn " + turn.qid() + " has neither baseline nor raw query");
  return turn;
}

std::vector<EnrichmentItem> Pipeline::items_for(std::span<const KeywordCandidate> keywords,
                                                const std::string& unified_answer) {
  std::vector<EnrichmentItem> items;
  items.reserve(keywords.size() + 1);
  for (const auto& k : keywords) items.push_back({ItemKind::keyword, k.text, {}, {}});
  if (!unified_answer.empty()) items.push_back({ItemKind::answer, unified_answer, {}, {}});
  return items;
}

TurnResult Pipeline::process(const ConversationTurn& input) const {
  TurnResult r;
  r.turn = prepare(input);
  const ConversationTurn& turn = r.turn;
  const std::string qid = turn.qid();

  r.baseline_run = to_run(qid, retriever_->retrieve(turn.baseline_query, config_.run_depth),
                          kBaselineTag);

  RankedList initial = retrieve_guided(*retriever_, turn, config_.guided_n);
  r.guided_stage1 = {turn.conversation_id, turn.turn_id, {}};
  r.guided = r.guided_stage1;
  if (!initial.empty()) {
    auto reranked = two_stage_rerank_detailed(
        initial, turn.baseline_query, embedder("rerank1"), embedder("rerank2"), *index_,
        {config_.intermediate_keep, config_.final_keep});
    r.guided_stage1 = std::move(reranked.stage1);
    r.guided = std::move(reranked.final);
  } else {
    spdlog::warn("turn {}: baseline query retrieved no guided documents", qid);
  }

  if (!r.guided.empty()) {
    if (config_.enrichment.keyword_top_docs > 0)
      r.keywords = augment_keywords(r.guided, turn, config_.enrichment, *index_,
                                    embedder("keyword"));
    if (config_.enrichment.answer_top_docs > 0)
      r.answers = expected_answers(r.guided, turn, config_.enrichment, *index_, *extractor_);
  }
  r.unified_answer = unify_answers(r.answers);

  r.filtered = filter_items(items_for(r.keywords, r.unified_answer), turn,
                            config_.filter_threshold, embedder("filter"),
                            config_.history_aggregation);

  std::vector<std::string> kept_keywords;
  std::string kept_answer;
  for (const auto& item : r.filtered.kept) {
    if (item.kind == ItemKind::keyword) {
      kept_keywords.push_back(item.text);
    } else {
      kept_answer = item.text;
    }
  }
  r.reformulated = unify(turn, std::span<const std::string>(kept_keywords), kept_answer);
  r.reformulated.dropped = r.filtered.dropped;

  r.final_run = to_run(qid, retriever_->retrieve(r.reformulated.final_text, config_.run_depth),
                       kFinalTag);
  return r;
}

// --- commands ---------------------------------------------------------------

std::shared_ptr<const CorpusIndex> load_or_build_index(const PipelineConfig& config) {
  const fs::path file = config.index_file();
  if (fs::exists(file)) {
    spdlog::info("loading index {}", file.string());
    return std::make_shared<const CorpusIndex>(CorpusIndex::load(file));
  }
  if (config.corpus_path.empty() || !fs::exists(config.corpus_path))
    throw Error("corpus not found: " + config.corpus_path.string());
  spdlog::info("no index at {}; building from {}", file.string(), config.corpus_path.string());
  auto docs = ingest_corpus(config.corpus_path, corpus_format_for(config.corpus_path));
  return std::make_shared<const CorpusIndex>(CorpusIndex::build(std::move(docs)));
}

IndexSummary cmd_index(const PipelineConfig& config) {
  if (config.corpus_path.empty() || !fs::exists(config.corpus_path))
    throw Error("corpus not found: " + config.corpus_path.string());
  auto docs = ingest_corpus(config.corpus_path, corpus_format_for(config.corpus_path));
  const CorpusIndex index = CorpusIndex::build(std::move(docs));
  IndexSummary s{config.index_file(), index.doc_count(), index.term_count()};
  if (s.index_file.has_parent_path()) fs::create_directories(s.index_file.parent_path());
  index.save(s.index_file);
  spdlog::info("indexed {} documents ({} terms) into {}", s.doc_count, s.term_count,
               s.index_file.string());
  return s;
}

ReformulateSummary cmd_reformulate(const PipelineConfig& config) {
  config.check_inputs(false);
  return cmd_reformulate(config, load_or_build_index(config));
}

ReformulateSummary cmd_reformulate(const PipelineConfig& config,
                                   std::shared_ptr<const CorpusIndex> index) {
  config.validate();
  if (!fs::exists(config.queries_path))
    throw Error("queries not found: " + config.queries_path.string());
  auto turns = load_turns(config.queries_path, config.rewriter_endpoint.has_value());
  std::stable_sort(turns.begin(), turns.end(),
                   [](const ConversationTurn& a, const ConversationTurn& b) {
                     if (a.conversation_id != b.conversation_id)
                       return a.conversation_id < b.conversation_id;
                     return a.turn_id < b.turn_id;
                   });

  const Pipeline pipeline(config, std::move(index));
  std::vector<std::optional<TurnResult>> results(turns.size());
  std::vector<std::string> errors(turns.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < turns.size(); i = next++) {
      try {
        results[i] = pipeline.process(turns[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        spdlog::error("turn {} failed: {}", turns[i].qid(), e.what());
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = resolve_workers(config.workers, turns.size());
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
    work();
  }

  ReformulateSummary summary;
  summary.turns = turns.size();
  std::vector<std::string> reformulated, enrichment;
  Run baseline, final_run, stage1, guided;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (!results[i]) {
      ++summary.failed;
      summary.failures.push_back(turns[i].qid() + ": " + errors[i]);
      continue;
    }
    TurnResult& r = *results[i];
    reformulated.push_back(to_json(r.reformulated).dump());
    enrichment.push_back(enrichment_json(r).dump());
    baseline.insert(baseline.end(), r.baseline_run.begin(), r.baseline_run.end());
    final_run.insert(final_run.end(), r.final_run.begin(), r.final_run.end());
    auto s1 = to_run(r.guided_stage1, kGuidedStage1Tag);
    stage1.insert(stage1.end(), s1.begin(), s1.end());
    auto g = to_run(r.guided, kGuidedTag);
    guided.insert(guided.end(), g.begin(), g.end());
    summary.kept_items += r.filtered.kept.size();
    summary.dropped_items += r.filtered.dropped.size();
    summary.results.push_back(std::move(r));
  }

  fs::create_directories(config.output_dir);
  write_lines(config.output_dir / kReformulatedFile, reformulated);
  write_lines(config.output_dir / kEnrichmentFile, enrichment);
  write_run(config.output_dir / kBaselineRunFile, baseline);
  write_run(config.output_dir / kFinalRunFile, final_run);
  write_run(config.output_dir / kGuidedStage1RunFile, stage1);
  write_run(config.output_dir / kGuidedRunFile, guided);
  spdlog::info("reformulated {} of {} turns into {}", summary.turns - summary.failed,
               summary.turns, config.output_dir.string());
  return summary;
}

nlohmann::ordered_json cmd_evaluate(const PipelineConfig& config,
                                    std::optional<fs::path> run_path,
                                    std::optional<fs::path> baseline_path) {
  if (!config.qrels_path) throw Error("evaluate needs a qrels path");
  if (!fs::exists(*config.qrels_path))
    throw Error("qrels not found: " + config.qrels_path->string());
  const Qrels qrels = parse_qrels(*config.qrels_path);

  const fs::path run_file = run_path.value_or(config.output_dir / kFinalRunFile);
  const Run run = read_run(run_file);
  const EvalReport report = evaluate(run, qrels, config.evaluation);
  if (report.evaluated == 0)
    spdlog::warn("{}: no run query has relevance judgments", run_file.string());
  if (!report.run_only.empty())
    spdlog::warn("{}: {} run queries lack judgments", run_file.string(), report.run_only.size());

  ojson out;
  out["run"] = run_file.generic_string();
  const ojson main_report = to_json(report);
  for (const auto& [k, v] : main_report.items()) out[k] = v;

  const std::string ndcg_key = "NDCG@" + std::to_string(config.evaluation.ndcg_k);
  if (!baseline_path) {
    fs::path guess = run_file.parent_path() / kBaselineRunFile;
    if (fs::exists(guess) && fs::absolute(guess) != fs::absolute(run_file)) baseline_path = guess;
  }
  if (baseline_path) {
    const EvalReport base = evaluate(read_run(*baseline_path), qrels, config.evaluation);
    ojson b = to_json(base);
    b["run"] = baseline_path->generic_string();
    out["baseline"] = std::move(b);
    ojson delta;
    delta["MRR"] = report.mrr - base.mrr;
    delta[ndcg_key] = report.ndcg - base.ndcg;
    out["delta"] = std::move(delta);
  }

  const fs::path enrichment = run_file.parent_path() / kEnrichmentFile;
  if (fs::exists(enrichment)) {
    auto index = load_or_build_index(config);
    out["keyword_precision"] = precision_report(enrichment, qrels, *index);
  }

  fs::create_directories(config.output_dir);
  std::ofstream(config.output_dir / kMetricsFile, std::ios::binary | std::ios::trunc)
      << out.dump(2) << '\n';
  return out;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "guided_n") return SweepAxis::guided_n;
  if (name == "keyword_top_docs") return SweepAxis::keyword_top_docs;
  if (name == "keyword_span") return SweepAxis::keyword_span;
  if (name == "filter_threshold") return SweepAxis::filter_threshold;
  throw PreconditionError("unknown sweep axis \"" + name + "\"");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::guided_n: return "guided_n";
    case SweepAxis::keyword_top_docs: return "keyword_top_docs";
    case SweepAxis::keyword_span: return "keyword_span";
    case SweepAxis::filter_threshold: return "filter_threshold";
  }
  return "?";
}

PipelineConfig with_axis(const PipelineConfig& config, SweepAxis axis, double value) {
  PipelineConfig c = config;
  switch (axis) {
    case SweepAxis::guided_n:
      c.guided_n = as_count(value, 1, "guided_n");
      break;
    case SweepAxis::keyword_top_docs:
      c.enrichment.keyword_top_docs = as_count(value, 0, "keyword_top_docs");
      break;
    case SweepAxis::keyword_span:
      c.enrichment.keyword_span = as_count(value, 1, "keyword_span");
      break;
    case SweepAxis::filter_threshold:
      if (!std::isfinite(value) || value < 0.0)
        throw PreconditionError("filter_threshold must be >= 0");
      c.filter_threshold = value;
      break;
  }
  c.validate();
  return c;
}

SweepReport cmd_sweep(const PipelineConfig& config, SweepAxis axis,
                      const std::vector<double>& values) {
  if (values.empty()) throw PreconditionError("sweep needs at least one value");
  config.check_inputs(true);
  auto index = load_or_build_index(config);
  const std::string ndcg_key = "NDCG@" + std::to_string(config.evaluation.ndcg_k);

  SweepReport report;
  report.axis = axis;
  for (double value : values) {
    SweepRow row;
    row.value = value;
    try {
      PipelineConfig c = with_axis(config, axis, value);
      c.output_dir = config.output_dir / "sweep" / to_string(axis) / format_number(value);
      c.index_path = config.index_file();
      const auto summary = cmd_reformulate(c, index);
      const auto metrics = cmd_evaluate(c);
      row.mrr = metrics.at("MRR").get<double>();
      row.ndcg = metrics.at(ndcg_key).get<double>();
      if (metrics.contains("baseline")) {
        row.baseline_mrr = metrics["baseline"].at("MRR").get<double>();
        row.baseline_ndcg = metrics["baseline"].at(ndcg_key).get<double>();
      }
      row.kept_items = summary.kept_items;
      row.dropped_items = summary.dropped_items;
      row.failed_turns = summary.failed;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
      spdlog::error("sweep {}={} failed: {}", to_string(axis), format_number(value), e.what());
    }
    report.rows.push_back(std::move(row));
  }

  const std::string stem = std::string("sweep_") + to_string(axis);
  report.csv_path = config.output_dir / (stem + ".csv");
  report.json_path = config.output_dir / (stem + ".json");
  fs::create_directories(config.output_dir);

  std::vector<std::string> csv{std::string(to_string(axis)) +
                               ",status,MRR," + ndcg_key + ",baseline_MRR,baseline_" +
                               ndcg_key + ",kept_items,dropped_items,failed_turns"};
  ojson rows = ojson::array();
  for (const auto& r : report.rows) {
    csv.push_back(format_number(r.value) + "," + (r.ok ? "ok" : "error") + "," +
                  format_number(r.mrr) + "," + format_number(r.ndcg) + "," +
                  format_number(r.baseline_mrr) + "," + format_number(r.baseline_ndcg) + "," +
                  std::to_string(r.kept_items) + "," + std::to_string(r.dropped_items) + "," +
                  std::to_string(r.failed_turns));
    ojson j;
    j[to_string(axis)] = r.value;
    j["status"] = r.ok ? "ok" : "error";
    j["MRR"] = r.mrr;
    j[ndcg_key] = r.ndcg;
    j["baseline_MRR"] = r.baseline_mrr;
    j["baseline_" + ndcg_key] = r.baseline_ndcg;
    j["kept_items"] = r.kept_items;
    j["dropped_items"] = r.dropped_items;
    j["failed_turns"] = r.failed_turns;
    if (!r.ok) j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  write_lines(report.csv_path, csv);
  ojson doc;
  doc["axis"] = to_string(axis);
  doc["rows"] = std::move(rows);
  write_lines(report.json_path, {doc.dump(2)});
  return report;
}

}  // namespace guidecqr
