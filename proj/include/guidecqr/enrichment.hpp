#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "guidecqr/corpus.hpp"
#include "guidecqr/embedding.hpp"
#include "guidecqr/guided.hpp"

namespace guidecqr {

struct KeywordCandidate {
  std::string text;  // lowercase, one token or a space-joined n-gram
  std::string source_doc;
  double score = 0.0;  // cosine to the query embedding

  friend bool operator==(const KeywordCandidate&, const KeywordCandidate&) = default;
};

struct AnswerSpan {
  std::string text;
  std::string source_doc;
  double score = 0.0;

  friend bool operator==(const AnswerSpan&, const AnswerSpan&) = default;
};

struct NgramRange {
  std::size_t low = 1;
  std::size_t high = 1;

  friend bool operator==(const NgramRange&, const NgramRange&) = default;
};

/// How many guided documents feed each signal, and how many keywords each
/// document contributes (`keyword_span`).
struct EnrichmentConfig {
  std::size_t keyword_top_docs = 4;
  std::size_t keyword_span = 15;
  NgramRange ngram_range;
  std::size_t answer_top_docs = 6;

  void validate() const;
  friend bool operator==(const EnrichmentConfig&, const EnrichmentConfig&) = default;
};

/// KeyBERT-style selection: unique n-grams (never crossing a sentence
/// boundary) scored by cosine to the query; the best `span` are returned,
/// ties in alphabetical order.
std::vector<KeywordCandidate> extract_keywords(const Document& doc, const std::string& query,
                                               std::size_t span, NgramRange ngram_range,
                                               const Embedder& embedder);

/// Keywords of the top `keyword_top_docs` guided documents, concatenated in
/// rank order. Duplicates across documents are kept.
std::vector<KeywordCandidate> augment_keywords(const RankedList& guided,
                                               const ConversationTurn& turn,
                                               const EnrichmentConfig& cfg,
                                               const CorpusIndex& doc_table,
                                               const Embedder& embedder);

enum class ExtractorKind { builtin, http };

struct ExtractorSpec {
  ExtractorKind kind = ExtractorKind::builtin;
  std::optional<std::string> endpoint;
  int max_retries = 3;
  int backoff_ms = 250;
  int timeout_seconds = 30;

  friend bool operator==(const ExtractorSpec&, const ExtractorSpec&) = default;
};

class AnswerExtractor {
 public:
  virtual ~AnswerExtractor() = default;
  virtual AnswerSpan extract(const ConversationTurn& turn, const Document& doc) const = 0;
};

/// Picks the document sentence closest to the baseline query; ties go to the
/// earliest sentence.
class SentenceAnswerExtractor final : public AnswerExtractor {
 public:
  explicit SentenceAnswerExtractor(std::shared_ptr<const Embedder> embedder)
      : embedder_(std::move(embedder)) {}

  AnswerSpan extract(const ConversationTurn& turn, const Document& doc) const override;

 private:
  std::shared_ptr<const Embedder> embedder_;
};

/// `POST {endpoint}/extract` with `{"question","context"}`, reply
/// `{"answer","score"}`; the answer string is used verbatim.
class HttpAnswerExtractor final : public AnswerExtractor {
 public:
  explicit HttpAnswerExtractor(ExtractorSpec spec);

  AnswerSpan extract(const ConversationTurn& turn, const Document& doc) const override;

 private:
  ExtractorSpec spec_;
};

/// `answer_embedder` is only used by the built-in extractor.
std::unique_ptr<AnswerExtractor> make_extractor(const ExtractorSpec& spec,
                                                std::shared_ptr<const Embedder> answer_embedder);

AnswerSpan extract_answer(const ConversationTurn& turn, const Document& doc,
                          const AnswerExtractor& extractor);

/// One expected answer per document for the top `answer_top_docs` guided
/// documents, in rank order.
std::vector<AnswerSpan> expected_answers(const RankedList& guided,
                                         const ConversationTurn& turn,
                                         const EnrichmentConfig& cfg,
                                         const CorpusIndex& doc_table,
                                         const AnswerExtractor& extractor);

/// Answer texts joined by single spaces; empty answers are skipped.
std::string unify_answers(std::span<const AnswerSpan> spans);

}  // namespace guidecqr
