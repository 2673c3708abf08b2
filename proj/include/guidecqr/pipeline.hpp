#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidecqr/config.hpp"
#include "guidecqr/corpus.hpp"
#include "guidecqr/enrichment.hpp"
#include "guidecqr/filter.hpp"
#include "guidecqr/guided.hpp"
#include "guidecqr/trec.hpp"

namespace guidecqr {

/// Process exit codes of the pipeline commands.
enum ExitCode : int { kExitOk = 0, kExitFatal = 1, kExitPartial = 2 };

/// Everything produced for one turn.
struct TurnResult {
  ConversationTurn turn;
  RankedList guided_stage1;
  RankedList guided;
  std::vector<KeywordCandidate> keywords;
  std::vector<AnswerSpan> answers;
  std::string unified_answer;
  FilterResult filtered;
  ReformulatedQuery reformulated;
  Run baseline_run;
  Run final_run;
};

/// Per-run wiring of index, retriever, stage embedders and extractor.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<const CorpusIndex> index);

  const PipelineConfig& config() const { return config_; }
  const CorpusIndex& index() const { return *index_; }
  const Retriever& retriever() const { return *retriever_; }
  const Embedder& embedder(std::string_view stage) const;

  /// Fills a missing baseline query through the configured rewriter, falling
  /// back to the raw query when the rewriter is absent or fails.
  ConversationTurn prepare(ConversationTurn turn) const;

  /// Guided retrieval, re-ranking, enrichment, filtering, unification and
  /// both retrievals for one turn.
  TurnResult process(const ConversationTurn& turn) const;

  /// Keyword items (one per augmented keyword) followed by the unified answer
  /// as a single item when it is non-empty.
  static std::vector<EnrichmentItem> items_for(std::span<const KeywordCandidate> keywords,
                                               const std::string& unified_answer);

 private:
  PipelineConfig config_;
  std::shared_ptr<const CorpusIndex> index_;
  std::map<std::string, std::shared_ptr<const Embedder>, std::less<>> embedders_;
  std::unique_ptr<Retriever> retriever_;
  std::unique_ptr<AnswerExtractor> extractor_;
};

/// Loads the index file when present, otherwise builds it from the corpus.
std::shared_ptr<const CorpusIndex> load_or_build_index(const PipelineConfig& config);

struct IndexSummary {
  std::filesystem::path index_file;
  std::size_t doc_count = 0;
  std::size_t term_count = 0;
};

IndexSummary cmd_index(const PipelineConfig& config);

struct ReformulateSummary {
  std::size_t turns = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  // "qid: message"
  std::size_t kept_items = 0;
  std::size_t dropped_items = 0;
  std::vector<TurnResult> results;  // in (conversation_id, turn_id) order

  int exit_code() const { return failed == 0 ? kExitOk : kExitPartial; }
};

/// Artifact names inside output_dir.
inline constexpr const char* kReformulatedFile = "reformulated.jsonl";
inline constexpr const char* kEnrichmentFile = "enrichment.jsonl";
inline constexpr const char* kBaselineRunFile = "baseline.run";
inline constexpr const char* kFinalRunFile = "guidecqr.run";
inline constexpr const char* kGuidedStage1RunFile = "guided_stage1.run";
inline constexpr const char* kGuidedRunFile = "guided.run";
inline constexpr const char* kMetricsFile = "metrics.json";

/// Runs every turn on a bounded worker pool and writes the artifacts. A turn
/// that throws is logged and skipped.
ReformulateSummary cmd_reformulate(const PipelineConfig& config);
ReformulateSummary cmd_reformulate(const PipelineConfig& config,
                                   std::shared_ptr<const CorpusIndex> index);

/// Evaluates `run_path` (default: output_dir/guidecqr.run) and, when present,
/// the baseline run next to it, with deltas. Adds keyword precision when an
/// enrichment artifact sits next to the run. Writes output_dir/metrics.json.
nlohmann::ordered_json cmd_evaluate(const PipelineConfig& config,
                                    std::optional<std::filesystem::path> run_path = {},
                                    std::optional<std::filesystem::path> baseline_path = {});

enum class SweepAxis { guided_n, keyword_top_docs, keyword_span, filter_threshold };

SweepAxis parse_sweep_axis(const std::string& name);
const char* to_string(SweepAxis axis);

/// Copy of `config` with one axis set to `value`.
PipelineConfig with_axis(const PipelineConfig& config, SweepAxis axis, double value);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  double mrr = 0.0;
  double ndcg = 0.0;
  double baseline_mrr = 0.0;
  double baseline_ndcg = 0.0;
  std::size_t kept_items = 0;
  std::size_t dropped_items = 0;
  std::size_t failed_turns = 0;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::guided_n;
  std::vector<SweepRow> rows;
  std::filesystem::path csv_path;
  std::filesystem::path json_path;
};

/// Reformulate + evaluate per value under output_dir/sweep/<axis>/<value>,
/// then write sweep_<axis>.csv and .json into output_dir. Failing values are
/// recorded and the grid continues.
SweepReport cmd_sweep(const PipelineConfig& config, SweepAxis axis,
                      const std::vector<double>& values);

std::string format_number(double v);

}  // namespace guidecqr
