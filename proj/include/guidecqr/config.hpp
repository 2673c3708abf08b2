#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "guidecqr/corpus.hpp"
#include "guidecqr/embedding.hpp"
#include "guidecqr/enrichment.hpp"
#include "guidecqr/filter.hpp"
#include "guidecqr/trec.hpp"

namespace guidecqr {

enum class RetrieverKind { bm25, dense };

/// Stages that each bind their own embedder.
inline constexpr std::array<std::string_view, 5> kEmbedderStages = {
    "rerank1", "rerank2", "keyword", "filter", "answer"};

/// Optional stage used by the dense retriever; falls back to "rerank1".
inline constexpr std::string_view kDenseStage = "dense";

struct PipelineConfig {
  std::string name;

  std::filesystem::path corpus_path;
  std::filesystem::path queries_path;
  std::optional<std::filesystem::path> qrels_path;
  std::optional<std::filesystem::path> index_path;  // default: <output_dir>/index.gcqr
  std::filesystem::path output_dir = "out";

  RetrieverKind retriever = RetrieverKind::bm25;
  Bm25Params bm25;
  std::size_t guided_n = 2000;
  std::size_t intermediate_keep = 100;
  std::size_t final_keep = 10;
  std::size_t run_depth = 1000;  // depth of the emitted baseline/final runs

  std::map<std::string, EmbedderSpec> embedders;
  EnrichmentConfig enrichment;
  ExtractorSpec extractor;
  double filter_threshold = 1.19;
  HistoryAggregation history_aggregation = HistoryAggregation::max_distance;
  EvalOptions evaluation;

  std::size_t workers = 0;  // 0: one per logical core
  std::optional<std::string> rewriter_endpoint;

  /// Deterministic embedders with a distinct seed per stage.
  static PipelineConfig defaults();

  /// Relative paths are resolved against the directory of the config file.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig parse(std::string_view toml_text,
                              const std::filesystem::path& base_dir = {});
  std::string to_toml() const;

  /// Structural checks: counts, stage map totality, ranges.
  void validate() const;
  /// Existence of every referenced input path. Throws Error naming the path.
  void check_inputs(bool need_qrels) const;

  std::filesystem::path index_file() const;
  const EmbedderSpec& embedder(std::string_view stage) const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

const char* to_string(RetrieverKind kind);

}  // namespace guidecqr
