#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidecqr/embedding.hpp"
#include "guidecqr/enrichment.hpp"
#include "guidecqr/guided.hpp"

namespace guidecqr {

enum class ItemKind { keyword, answer };

struct EnrichmentItem {
  ItemKind kind = ItemKind::keyword;
  std::string text;
  std::optional<EmbeddingVector> embedding;
  std::optional<double> filter_score;
};

/// How the per-history distances fold into one HistoryScore.
///  - max_distance: max_i 10(1 - cos(history[i], item)); the default.
///  - min_distance: distance to the most similar history query.
enum class HistoryAggregation { max_distance, min_distance };

/// 10 (1 - cos(query, item)). Spans [0, 20].
double query_score(const EmbeddingVector& query_emb, const EmbeddingVector& item_emb);

/// Aggregated 10 (1 - cos(history[i], item)); 0 for an empty history.
double history_score(std::span<const EmbeddingVector> history_embs,
                     const EmbeddingVector& item_emb,
                     HistoryAggregation aggregation = HistoryAggregation::max_distance);

/// Mean of the two scores. Throws PreconditionError on a negative input.
double filter_score(double qs, double hs);

struct FilterResult {
  std::vector<EnrichmentItem> kept;
  std::vector<EnrichmentItem> dropped;
};

/// Scores every item against the turn's baseline query and history with
/// `embedder`; items with filter_score >= threshold are kept. Both output
/// lists keep input order.
FilterResult filter_items(std::vector<EnrichmentItem> items, const ConversationTurn& turn,
                          double threshold, const Embedder& embedder,
                          HistoryAggregation aggregation = HistoryAggregation::max_distance);

struct ReformulatedQuery {
  std::string conversation_id;
  int turn_id = 0;
  std::string baseline;
  std::vector<std::string> kept_keywords;
  std::string kept_answer;
  std::string final_text;
  std::vector<EnrichmentItem> dropped;

  std::string qid() const { return conversation_id + "_" + std::to_string(turn_id); }
};

/// Baseline, then the case-insensitively deduplicated keywords, then the
/// answer, space separated; empty parts leave no separator behind.
ReformulatedQuery unify(const ConversationTurn& turn,
                        std::span<const KeywordCandidate> kept_keywords,
                        const std::string& kept_answer);
ReformulatedQuery unify(const ConversationTurn& turn,
                        std::span<const std::string> kept_keywords,
                        const std::string& kept_answer);

/// One reformulated-queries jsonl record.
nlohmann::ordered_json to_json(const ReformulatedQuery& q);

const char* to_string(ItemKind kind);
const char* to_string(HistoryAggregation aggregation);
HistoryAggregation parse_history_aggregation(const std::string& name);

}  // namespace guidecqr
