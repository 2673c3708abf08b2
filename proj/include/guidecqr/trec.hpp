#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidecqr/corpus.hpp"
#include "guidecqr/enrichment.hpp"
#include "guidecqr/guided.hpp"

namespace guidecqr {

/// qid ("<conversation>_<turn>") -> doc_id -> graded relevance 0..4.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;

  std::size_t size() const;
  bool contains(const std::string& qid) const { return judgments.count(qid) != 0; }
};

/// Reads `qid 0 docid rel` lines. Throws ParseError with the line number on
/// malformed lines, non-integer or out-of-range relevance and duplicate
/// (qid, docid) pairs.
Qrels parse_qrels(std::istream& in);
Qrels parse_qrels(const std::filesystem::path& path);

struct RunEntry {
  std::string qid;
  std::string doc_id;
  int rank = 1;
  double score = 0.0;
  std::string tag;

  friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

using Run = std::vector<RunEntry>;

/// `qid Q0 docid rank score tag`. Scores are written in the shortest form
/// that parses back to the same double.
void write_run(std::ostream& out, std::span<const RunEntry> run);
void write_run(const std::filesystem::path& path, std::span<const RunEntry> run);
Run read_run(std::istream& in);
Run read_run(const std::filesystem::path& path);

/// Run entries for one ranked list, ranks 1..n.
Run to_run(const RankedList& list, const std::string& tag);
Run to_run(const std::string& qid, std::span<const ScoredDoc> docs, const std::string& tag);

enum class GainMode { linear, exponential };

struct EvalOptions {
  int rel_threshold = 1;  // MRR: first doc with rel >= threshold
  std::size_t ndcg_k = 3;
  GainMode gain = GainMode::linear;

  friend bool operator==(const EvalOptions&, const EvalOptions&) = default;
};

/// Mean reciprocal rank over run queries that are judged and have at least
/// one doc with rel >= rel_threshold. Throws PreconditionError on an empty run.
double mrr(std::span<const RunEntry> run, const Qrels& qrels, int rel_threshold = 1);

/// Mean NDCG@k over run queries present in the qrels; a query whose ideal
/// DCG is 0 scores 0. Linear gain uses rel, exponential gain 2^rel - 1.
double ndcg_at_k(std::span<const RunEntry> run, const Qrels& qrels, std::size_t k = 3,
                 GainMode gain = GainMode::linear);

struct QueryMetrics {
  double reciprocal_rank = 0.0;
  bool has_relevant = false;
  double ndcg = 0.0;
};

struct EvalReport {
  double mrr = 0.0;
  double ndcg = 0.0;
  std::size_t evaluated = 0;        // run queries present in qrels
  std::size_t mrr_evaluated = 0;    // ... that also have a relevant doc
  std::map<std::string, QueryMetrics> per_query;
  std::vector<std::string> run_only;    // run qids without judgments
  std::vector<std::string> qrels_only;  // judged qids missing from the run
  EvalOptions options;
};

/// Evaluates both metrics. Unlike mrr()/ndcg_at_k() an empty run or an empty
/// intersection is not an error; it yields zero evaluated queries.
EvalReport evaluate(std::span<const RunEntry> run, const Qrels& qrels,
                    const EvalOptions& options = {});

/// `{"MRR", "NDCG@k", "per_query", ...}` with options and key mismatches.
nlohmann::ordered_json to_json(const EvalReport& report);

struct Precision {
  std::size_t matched = 0;  // N4
  std::size_t total = 0;    // unique keyword texts
  double value() const {
    return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
  }
};

/// Share of unique (case-folded) keywords whose every token occurs in some
/// rel-4 document judged for `qid`. Judged docs missing from `doc_table` are
/// skipped with a warning.
Precision keyword_precision_counts(std::span<const KeywordCandidate> keywords,
                                   const Qrels& qrels, const std::string& qid,
                                   const CorpusIndex& doc_table);
double keyword_precision(std::span<const KeywordCandidate> keywords, const Qrels& qrels,
                         const std::string& qid, const CorpusIndex& doc_table);

}  // namespace guidecqr
