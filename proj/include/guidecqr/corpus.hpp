#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace guidecqr {

struct Document {
  std::string doc_id;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class CorpusFormat { jsonl, tsv };

/// Reads a passage corpus. jsonl lines are `{"doc_id": ..., "text": ...}`,
/// tsv rows are `doc_id<TAB>text`. Blank lines are skipped. Throws ParseError
/// carrying the 1-based line number on malformed rows, duplicate ids and
/// blank texts.
std::vector<Document> ingest_corpus(const std::filesystem::path& path,
                                    CorpusFormat format);

/// Picks the format from the extension: ".tsv" is tsv, everything else jsonl.
CorpusFormat corpus_format_for(const std::filesystem::path& path);

struct Posting {
  std::uint32_t doc = 0;  // position in the doc table
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;

  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

/// A scored document reference.
struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Immutable inverted index over a corpus. Safe for concurrent readers.
class CorpusIndex {
 public:
  /// Throws PreconditionError on an empty corpus and ParseError on duplicate
  /// ids or blank texts (line = position + 1).
  static CorpusIndex build(std::vector<Document> docs);

  std::size_t doc_count() const { return docs_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  const std::vector<Document>& docs() const { return docs_; }
  const Document& doc(std::size_t position) const { return docs_.at(position); }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }

  std::optional<std::size_t> position_of(std::string_view doc_id) const;
  const Document* find(std::string_view doc_id) const;

  /// Empty span when the term is not indexed.
  const std::vector<Posting>& postings(const std::string& term) const;

  /// Terms in lexicographic order.
  std::vector<std::string> terms() const;
  std::size_t term_count() const { return postings_.size(); }

  /// Okapi BM25 with the non-negative idf ln(1 + (N - df + 0.5) / (df + 0.5)).
  /// Results are ordered by (score desc, doc_id asc), at most min(k, N), and
  /// only include documents sharing a query term. Throws PreconditionError
  /// on k == 0 or when the query has no tokens ("empty query").
  std::vector<ScoredDoc> bm25(std::string_view query, std::size_t k,
                              const Bm25Params& params = {}) const;

  /// Versioned text format, first line "GCQR-IDX-1". Output is a pure
  /// function of the indexed documents.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static CorpusIndex load(std::istream& in);
  static CorpusIndex load(const std::filesystem::path& path);

 private:
  CorpusIndex() = default;

  std::vector<Document> docs_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> id_to_position_;
};

inline constexpr std::string_view kIndexMagic = "GCQR-IDX-1";

inline CorpusIndex build_index(std::vector<Document> docs) {
  return CorpusIndex::build(std::move(docs));
}

inline std::vector<ScoredDoc> bm25_retrieve(const CorpusIndex& index,
                                            std::string_view query,
                                            std::size_t k,
                                            const Bm25Params& params = {}) {
  return index.bm25(query, k, params);
}

}  // namespace guidecqr
