#include "guidecqr/filter.hpp"

#include <algorithm>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"

namespace guidecqr {

double query_score(const EmbeddingVector& query_emb, const EmbeddingVector& item_emb) {
  return 10.0 * (1.0 - cosine_similarity(query_emb, item_emb));
}

double history_score(std::span<const EmbeddingVector> history_embs,
                     const EmbeddingVector& item_emb, HistoryAggregation aggregation) {
  if (history_embs.empty()) return 0.0;
  double agg = 10.0 * (1.0 - cosine_similarity(history_embs[0], item_emb));
  for (std::size_t i = 1; i < history_embs.size(); ++i) {
    const double d = 10.0 * (1.0 - cosine_similarity(history_embs[i], item_emb));
    agg = aggregation == HistoryAggregation::max_distance ? std::max(agg, d)
                                                          : std::min(agg, d);
  }
  return agg;
}

double filter_score(double qs, double hs) {
  if (qs < 0.0 || hs < 0.0) throw PreconditionError("filter_score: negative input");
  return (qs + hs) / 2.0;
}

FilterResult filter_items(std::vector<EnrichmentItem> items, const ConversationTurn& turn,
                          double threshold, const Embedder& embedder,
                          HistoryAggregation aggregation) {
  if (threshold < 0.0) throw PreconditionError("filter threshold must be >= 0");
  FilterResult result;
  if (items.empty()) return result;

  std::vector<std::string> texts;
  texts.reserve(1 + turn.history.size() + items.size());
  texts.push_back(turn.baseline_query);
  for (const auto& h : turn.history) texts.push_back(h);
  for (const auto& item : items) texts.push_back(item.text);
  auto vectors = embedder.embed(texts);

  const EmbeddingVector& query = vectors[0];
  std::span<const EmbeddingVector> history(vectors.data() + 1, turn.history.size());
  if (history.empty())
    spdlog::debug("turn {} has no history; HistoryScore is 0 for its items", turn.qid());

  for (std::size_t i = 0; i < items.size(); ++i) {
    EnrichmentItem& item = items[i];
    item.embedding = std::move(vectors[1 + turn.history.size() + i]);
    // Clamp the rounding residue of cos ~ 1 so scores stay non-negative.
    const double qs = std::max(0.0, query_score(query, *item.embedding));
    const double hs = std::max(0.0, history_score(history, *item.embedding, aggregation));
    item.filter_score = filter_score(qs, hs);
    if (*item.filter_score >= threshold) {
      result.kept.push_back(std::move(item));
    } else {
      result.dropped.push_back(std::move(item));
    }
  }
  return result;
}

ReformulatedQuery unify(const ConversationTurn& turn,
                        std::span<const std::string> kept_keywords,
                        const std::string& kept_answer) {
  ReformulatedQuery q;
  q.conversation_id = turn.conversation_id;
  q.turn_id = turn.turn_id;
  q.baseline = turn.baseline_query;
  q.kept_answer = kept_answer;

  std::unordered_set<std::string> seen;
  for (const auto& kw : kept_keywords) {
    if (kw.empty()) continue;
    if (seen.insert(to_lower(kw)).second) q.kept_keywords.push_back(kw);
  }

  q.final_text = q.baseline;
  auto append = [&](const std::string& part) {
    if (part.empty()) return;
    if (!q.final_text.empty()) q.final_text += ' ';
    q.final_text += part;
  };
  for (const auto& kw : q.kept_keywords) append(kw);
  append(q.kept_answer);
  return q;
}

ReformulatedQuery unify(const ConversationTurn& turn,
                        std::span<const KeywordCandidate> kept_keywords,
                        const std::string& kept_answer) {
  std::vector<std::string> texts;
  texts.reserve(kept_keywords.size());
  for (const auto& k : kept_keywords) texts.push_back(k.text);
  return unify(turn, std::span<const std::string>(texts), kept_answer);
}

nlohmann::ordered_json to_json(const ReformulatedQuery& q) {
  nlohmann::ordered_json dropped = nlohmann::ordered_json::array();
  for (const auto& item : q.dropped) {
    nlohmann::ordered_json d;
    d["text"] = item.text;
    d["kind"] = to_string(item.kind);
    d["filter_score"] = item.filter_score.value_or(0.0);
    dropped.push_back(std::move(d));
  }
  nlohmann::ordered_json out;
  out["conversation_id"] = q.conversation_id;
  out["turn_id"] = q.turn_id;
  out["baseline"] = q.baseline;
  out["kept_keywords"] = q.kept_keywords;
  out["kept_answer"] = q.kept_answer;
  out["final_text"] = q.final_text;
  out["dropped"] = std::move(dropped);
  return out;
}

const char* to_string(ItemKind kind) {
  return kind == ItemKind::keyword ? "keyword" : "answer";
}

const char* to_string(HistoryAggregation aggregation) {
  return aggregation == HistoryAggregation::max_distance ? "max_distance" : "min_distance";
}

HistoryAggregation parse_history_aggregation(const std::string& name) {
  if (name == "max_distance") return HistoryAggregation::max_distance;
  if (name == "min_distance") return HistoryAggregation::min_distance;
  throw PreconditionError("unknown history_aggregation \"" + name +
                          "\" (expected max_distance or min_distance)");
}

}  // namespace guidecqr
