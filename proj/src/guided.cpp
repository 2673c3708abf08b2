#include "guidecqr/guided.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"

namespace guidecqr {

using json = nlohmann::json;

namespace {

std::string embeddable_text(const Document& doc) {
  std::string_view cut = truncate_tokens(doc.text, kMaxEmbedTokens);
  if (cut.size() < doc.text.size()) {
    spdlog::debug("document {} truncated to {} tokens before embedding", doc.doc_id,
                  kMaxEmbedTokens);
    return std::string(trim(cut));
  }
  return doc.text;
}

}  // namespace

std::vector<ConversationTurn> load_turns(const std::filesystem::path& path,
                                         bool allow_missing_baseline) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open queries file: " + path.string());
  std::vector<ConversationTurn> turns;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json row = json::parse(line);
      ConversationTurn t;
      const json& cid = row.at("conversation_id");
      t.conversation_id = cid.is_string() ? cid.get<std::string>() : cid.dump();
      t.turn_id = row.at("turn_id").get<int>();
      t.raw_query = row.value("raw_query", "");
      t.baseline_query = row.value("baseline_query", "");
      if (row.contains("history")) t.history = row["history"].get<std::vector<std::string>>();
      if (t.conversation_id.empty()) throw ParseError("empty conversation_id", line_no);
      if (t.turn_id < 1) throw ParseError("turn_id must be >= 1", line_no);
      if (trim(t.baseline_query).empty() && !allow_missing_baseline)
        throw ParseError("empty baseline_query", line_no);
      turns.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed turn: ") + e.what(), line_no);
    }
  }
  return turns;
}

DenseRetriever::DenseRetriever(const CorpusIndex& index,
                               std::shared_ptr<const Embedder> embedder)
    : index_(index), embedder_(std::move(embedder)) {
  std::vector<std::string> texts;
  texts.reserve(index_.doc_count());
  for (const Document& d : index_.docs()) texts.push_back(embeddable_text(d));
  doc_vectors_ = embedder_->embed(texts);
}

std::vector<ScoredDoc> DenseRetriever::retrieve(std::string_view query,
                                                std::size_t k) const {
  if (k == 0) throw PreconditionError("k must be >= 1");
  if (trim(query).empty()) throw PreconditionError("empty query");
  const EmbeddingVector q = embedder_->embed_one(std::string(query));
  std::vector<ScoredDoc> hits;
  hits.reserve(doc_vectors_.size());
  for (std::size_t i = 0; i < doc_vectors_.size(); ++i)
    hits.push_back({index_.doc(i).doc_id, cosine_similarity(q, doc_vectors_[i])});
  std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  hits.resize(std::min(k, hits.size()));
  return hits;
}

RankedList retrieve_guided(const Retriever& retriever, const ConversationTurn& turn,
                           std::size_t n) {
  if (n == 0) throw PreconditionError("guided_n must be >= 1");
  return {turn.conversation_id, turn.turn_id, retriever.retrieve(turn.baseline_query, n)};
}

RankedList retrieve_guided(const CorpusIndex& index, const ConversationTurn& turn,
                           std::size_t n) {
  return retrieve_guided(Bm25Retriever(index), turn, n);
}

RankedList rerank_once(const RankedList& candidates, const std::string& query,
                       const Embedder& embedder, std::size_t keep,
                       const CorpusIndex& doc_table) {
  if (candidates.empty()) throw PreconditionError("rerank: no candidates");
  if (keep == 0) throw PreconditionError("rerank: keep must be >= 1");

  std::vector<std::string> texts;
  texts.reserve(candidates.size() + 1);
  texts.push_back(query);
  for (const ScoredDoc& c : candidates.entries) {
    const Document* doc = doc_table.find(c.doc_id);
    if (doc == nullptr) throw Error("rerank: no text for doc_id \"" + c.doc_id + "\"");
    texts.push_back(embeddable_text(*doc));
  }
  const auto vectors = embedder.embed(texts);

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    scores[i] = cosine_similarity(vectors[0], vectors[i + 1]);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RankedList out{candidates.conversation_id, candidates.turn_id, {}};
  const std::size_t n = std::min(keep, order.size());
  out.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.entries.push_back({candidates.entries[order[i]].doc_id, scores[order[i]]});
  return out;
}

TwoStageResult two_stage_rerank_detailed(const RankedList& candidates,
                                         const std::string& query,
                                         const Embedder& stage1, const Embedder& stage2,
                                         const CorpusIndex& doc_table,
                                         const RerankOptions& options) {
  if (options.final_keep == 0) throw PreconditionError("final_keep must be >= 1");
  if (options.intermediate_keep < options.final_keep)
    throw PreconditionError("intermediate_keep must be >= final_keep");
  if (stage1.provider_id() == stage2.provider_id())
    spdlog::warn("both re-ranking stages use provider {}", stage1.provider_id());

  TwoStageResult r;
  r.stage1 = rerank_once(candidates, query, stage1, options.intermediate_keep, doc_table);
  r.final = rerank_once(r.stage1, query, stage2, options.final_keep, doc_table);
  return r;
}

RankedList two_stage_rerank(const RankedList& candidates, const std::string& query,
                            const Embedder& stage1, const Embedder& stage2,
                            const CorpusIndex& doc_table, const RerankOptions& options) {
  return two_stage_rerank_detailed(candidates, query, stage1, stage2, doc_table, options)
      .final;
}

}  // namespace guidecqr
