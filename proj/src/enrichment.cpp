#include "guidecqr/enrichment.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"
#include "http_json.hpp"

namespace guidecqr {

namespace {

std::set<std::string> candidate_ngrams(std::string_view text, NgramRange range) {
  std::set<std::string> grams;
  for (const SentenceSpan& sentence : split_sentences(text)) {
    const auto tokens = tokenize(sentence.text);
    for (std::size_t n = range.low; n <= range.high; ++n) {
      for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string gram = tokens[i];
        for (std::size_t j = i + 1; j < i + n; ++j) gram += ' ' + tokens[j];
        grams.insert(std::move(gram));
      }
    }
  }
  return grams;
}

const Document& lookup(const CorpusIndex& doc_table, const std::string& doc_id) {
  const Document* doc = doc_table.find(doc_id);
  if (doc == nullptr) throw Error("no text for doc_id \"" + doc_id + "\"");
  return *doc;
}

std::size_t clamp_docs(std::size_t wanted, std::size_t available, const char* what) {
  if (wanted > available) {
    spdlog::warn("{} = {} exceeds the {} guided documents; clamping", what, wanted,
                 available);
    return available;
  }
  return wanted;
}

}  // namespace

void EnrichmentConfig::validate() const {
  if (keyword_span == 0) throw PreconditionError("keyword_span must be >= 1");
  if (ngram_range.low < 1 || ngram_range.low > ngram_range.high || ngram_range.high > 3)
    throw PreconditionError("ngram_range must satisfy 1 <= low <= high <= 3");
}

std::vector<KeywordCandidate> extract_keywords(const Document& doc, const std::string& query,
                                               std::size_t span, NgramRange ngram_range,
                                               const Embedder& embedder) {
  if (trim(doc.text).empty()) throw PreconditionError("extract_keywords: empty document");
  if (span == 0) throw PreconditionError("extract_keywords: span must be >= 1");
  EnrichmentConfig{0, span, ngram_range, 0}.validate();

  const auto grams = candidate_ngrams(doc.text, ngram_range);
  if (grams.empty()) return {};

  std::vector<std::string> texts;
  texts.reserve(grams.size() + 1);
  texts.push_back(query);
  texts.insert(texts.end(), grams.begin(), grams.end());
  const auto vectors = embedder.embed(texts);

  std::vector<KeywordCandidate> scored;
  scored.reserve(grams.size());
  for (std::size_t i = 1; i < texts.size(); ++i)
    scored.push_back({texts[i], doc.doc_id, cosine_similarity(vectors[0], vectors[i])});
  // `grams` is sorted, so a stable sort on score leaves ties alphabetical.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const KeywordCandidate& a, const KeywordCandidate& b) {
                     return a.score > b.score;
                   });
  if (scored.size() > span) scored.resize(span);
  return scored;
}

std::vector<KeywordCandidate> augment_keywords(const RankedList& guided,
                                               const ConversationTurn& turn,
                                               const EnrichmentConfig& cfg,
                                               const CorpusIndex& doc_table,
                                               const Embedder& embedder) {
  if (guided.empty()) throw PreconditionError("augment_keywords: no guided documents");
  cfg.validate();
  const std::size_t docs = clamp_docs(cfg.keyword_top_docs, guided.size(), "keyword_top_docs");
  std::vector<KeywordCandidate> out;
  for (std::size_t i = 0; i < docs; ++i) {
    auto kws = extract_keywords(lookup(doc_table, guided.entries[i].doc_id),
                                turn.baseline_query, cfg.keyword_span, cfg.ngram_range,
                                embedder);
    out.insert(out.end(), std::make_move_iterator(kws.begin()),
               std::make_move_iterator(kws.end()));
  }
  return out;
}

AnswerSpan SentenceAnswerExtractor::extract(const ConversationTurn& turn,
                                            const Document& doc) const {
  if (trim(doc.text).empty()) throw PreconditionError("extract_answer: empty document");
  const auto sentences = split_sentences(doc.text);

  std::vector<std::string> texts;
  texts.reserve(sentences.size() + 1);
  texts.push_back(turn.baseline_query);
  for (const auto& s : sentences) texts.emplace_back(s.text);
  const auto vectors = embedder_->embed(texts);

  std::size_t best = 0;
  double best_score = cosine_similarity(vectors[0], vectors[1]);
  for (std::size_t i = 1; i < sentences.size(); ++i) {
    const double s = cosine_similarity(vectors[0], vectors[i + 1]);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return {std::string(sentences[best].text), doc.doc_id, best_score};
}

HttpAnswerExtractor::HttpAnswerExtractor(ExtractorSpec spec) : spec_(std::move(spec)) {
  if (!spec_.endpoint || spec_.endpoint->empty())
    throw PreconditionError("http extractor needs an endpoint");
}

AnswerSpan HttpAnswerExtractor::extract(const ConversationTurn& turn,
                                        const Document& doc) const {
  nlohmann::json body{{"question", turn.baseline_query}, {"context", doc.text}};
  auto reply = detail::post_json(*spec_.endpoint, "/extract", body,
                                 {spec_.max_retries, spec_.backoff_ms, spec_.timeout_seconds});
  if (!reply.is_object() || !reply.contains("answer") || !reply["answer"].is_string())
    throw ProtocolError("extract reply lacks a string \"answer\"");
  double score = 0.0;
  if (reply.contains("score") && reply["score"].is_number()) score = reply["score"].get<double>();
  return {reply["answer"].get<std::string>(), doc.doc_id, score};
}

std::unique_ptr<AnswerExtractor> make_extractor(const ExtractorSpec& spec,
                                                std::shared_ptr<const Embedder> answer_embedder) {
  if (spec.kind == ExtractorKind::http) return std::make_unique<HttpAnswerExtractor>(spec);
  if (!answer_embedder) throw PreconditionError("built-in extractor needs an embedder");
  return std::make_unique<SentenceAnswerExtractor>(std::move(answer_embedder));
}

AnswerSpan extract_answer(const ConversationTurn& turn, const Document& doc,
                          const AnswerExtractor& extractor) {
  return extractor.extract(turn, doc);
}

std::vector<AnswerSpan> expected_answers(const RankedList& guided,
                                         const ConversationTurn& turn,
                                         const EnrichmentConfig& cfg,
                                         const CorpusIndex& doc_table,
                                         const AnswerExtractor& extractor) {
  const std::size_t docs = clamp_docs(cfg.answer_top_docs, guided.size(), "answer_top_docs");
  std::vector<AnswerSpan> out;
  out.reserve(docs);
  for (std::size_t i = 0; i < docs; ++i)
    out.push_back(extractor.extract(turn, lookup(doc_table, guided.entries[i].doc_id)));
  return out;
}

std::string unify_answers(std::span<const AnswerSpan> spans) {
  std::string out;
  for (const AnswerSpan& a : spans) {
    if (a.text.empty()) continue;
    if (!out.empty()) out += ' ';
    out += a.text;
  }
  return out;
}

}  // namespace guidecqr
