#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "guidecqr/corpus.hpp"
#include "guidecqr/embedding.hpp"

namespace guidecqr {

struct ConversationTurn {
  std::string conversation_id;
  int turn_id = 1;
  std::string raw_query;
  std::string baseline_query;
  std::vector<std::string> history;  // prior turns' queries, oldest first

  /// TREC query id, "<conversation_id>_<turn_id>".
  std::string qid() const { return conversation_id + "_" + std::to_string(turn_id); }
};

/// Reads `{"conversation_id","turn_id","raw_query","baseline_query","history"}`
/// lines. A missing or empty baseline_query is accepted only when
/// `allow_missing_baseline` is set (an external rewriter fills it in).
std::vector<ConversationTurn> load_turns(const std::filesystem::path& path,
                                         bool allow_missing_baseline = false);

/// Ordered guided documents for one turn. Scores are non-increasing and
/// doc ids unique.
struct RankedList {
  std::string conversation_id;
  int turn_id = 0;
  std::vector<ScoredDoc> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::string qid() const { return conversation_id + "_" + std::to_string(turn_id); }
};

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredDoc> retrieve(std::string_view query, std::size_t k) const = 0;
};

class Bm25Retriever final : public Retriever {
 public:
  explicit Bm25Retriever(const CorpusIndex& index, Bm25Params params = {})
      : index_(index), params_(params) {}

  std::vector<ScoredDoc> retrieve(std::string_view query, std::size_t k) const override {
    return index_.bm25(query, k, params_);
  }

 private:
  const CorpusIndex& index_;
  Bm25Params params_;
};

/// Ranks every document by cosine between the query and the document text
/// (first 512 tokens), ties by doc_id. Document vectors are computed once.
class DenseRetriever final : public Retriever {
 public:
  DenseRetriever(const CorpusIndex& index, std::shared_ptr<const Embedder> embedder);

  std::vector<ScoredDoc> retrieve(std::string_view query, std::size_t k) const override;

 private:
  const CorpusIndex& index_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<EmbeddingVector> doc_vectors_;
};

inline constexpr std::size_t kDefaultGuidedN = 2000;
inline constexpr std::size_t kDefaultIntermediateKeep = 100;
inline constexpr std::size_t kDefaultFinalKeep = 10;
inline constexpr std::size_t kMaxEmbedTokens = 512;

/// Top-n documents for the turn's baseline query.
RankedList retrieve_guided(const Retriever& retriever, const ConversationTurn& turn,
                           std::size_t n = kDefaultGuidedN);
RankedList retrieve_guided(const CorpusIndex& index, const ConversationTurn& turn,
                           std::size_t n = kDefaultGuidedN);

/// Rescores every candidate by cosine(embed(query), embed(doc text)), sorts
/// by that score (ties keep the prior order) and keeps the first `keep`.
/// Texts longer than 512 tokens are cut before embedding.
RankedList rerank_once(const RankedList& candidates, const std::string& query,
                       const Embedder& embedder, std::size_t keep,
                       const CorpusIndex& doc_table);

struct RerankOptions {
  std::size_t intermediate_keep = kDefaultIntermediateKeep;
  std::size_t final_keep = kDefaultFinalKeep;
};

struct TwoStageResult {
  RankedList stage1;
  RankedList final;
};

/// rerank_once with `stage1` keeping intermediate_keep, then with `stage2`
/// keeping final_keep. Logs a warning when both stages share a provider.
TwoStageResult two_stage_rerank_detailed(const RankedList& candidates,
                                         const std::string& query,
                                         const Embedder& stage1, const Embedder& stage2,
                                         const CorpusIndex& doc_table,
                                         const RerankOptions& options = {});

RankedList two_stage_rerank(const RankedList& candidates, const std::string& query,
                            const Embedder& stage1, const Embedder& stage2,
                            const CorpusIndex& doc_table,
                            const RerankOptions& options = {});

}  // namespace guidecqr
