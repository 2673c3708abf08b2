#include "guidecqr/config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "guidecqr/error.hpp"

namespace guidecqr {

namespace fs = std::filesystem;

namespace {

std::string where(const toml::node* node) {
  if (node == nullptr) return "";
  const auto& src = node->source();
  return " (line " + std::to_string(src.begin.line) + ")";
}

template <typename T>
std::optional<T> get(const toml::table& t, std::string_view key) {
  const toml::node* node = t.get(key);
  if (node == nullptr) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) return *v;  // accepts integers too
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value_exact<std::string>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value_exact<bool>()) return *v;
  } else {
    if (auto v = node->value_exact<std::int64_t>()) {
      if (*v < 0) throw ParseError("\"" + std::string(key) + "\" must be >= 0" + where(node), 0);
      return static_cast<T>(*v);
    }
  }
  throw ParseError("\"" + std::string(key) + "\" has the wrong type" + where(node), 0);
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& out) {
  if (auto v = get<T>(t, key)) out = *v;
}

const toml::table* section(const toml::table& root, std::string_view key) {
  const toml::node* node = root.get(key);
  if (node == nullptr) return nullptr;
  if (!node->is_table()) throw ParseError("[" + std::string(key) + "] must be a table" + where(node), 0);
  return node->as_table();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

EmbedderSpec parse_embedder(const toml::table& t, std::string_view stage) {
  EmbedderSpec spec;
  const std::string kind = get<std::string>(t, "kind").value_or("deterministic");
  if (kind == "deterministic") {
    spec.kind = EmbedderKind::deterministic;
  } else if (kind == "http") {
    spec.kind = EmbedderKind::http;
  } else {
    throw ParseError("embedders." + std::string(stage) + ".kind must be deterministic or http", 0);
  }
  read(t, "dimension", spec.dimension);
  read(t, "seed", spec.seed);
  if (auto v = get<std::string>(t, "endpoint")) spec.endpoint = *v;
  if (auto v = get<std::string>(t, "model")) spec.model_name = *v;
  read(t, "batch_size", spec.batch_size);
  read(t, "max_in_flight", spec.max_in_flight);
  read(t, "max_retries", spec.max_retries);
  read(t, "backoff_ms", spec.backoff_ms);
  read(t, "timeout_seconds", spec.timeout_seconds);
  return spec;
}

toml::table embedder_table(const EmbedderSpec& spec) {
  toml::table t;
  t.insert("kind", spec.kind == EmbedderKind::deterministic ? "deterministic" : "http");
  t.insert("dimension", static_cast<std::int64_t>(spec.dimension));
  t.insert("seed", static_cast<std::int64_t>(spec.seed));
  if (spec.endpoint) t.insert("endpoint", *spec.endpoint);
  if (spec.model_name) t.insert("model", *spec.model_name);
  t.insert("batch_size", static_cast<std::int64_t>(spec.batch_size));
  t.insert("max_in_flight", static_cast<std::int64_t>(spec.max_in_flight));
  t.insert("max_retries", spec.max_retries);
  t.insert("backoff_ms", spec.backoff_ms);
  t.insert("timeout_seconds", spec.timeout_seconds);
  return t;
}

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

const char* to_string(RetrieverKind kind) {
  return kind == RetrieverKind::bm25 ? "bm25" : "dense";
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.name = "default";
  std::uint64_t seed = 11;
  for (auto stage : kEmbedderStages) {
    EmbedderSpec spec;
    spec.dimension = 256;
    spec.seed = seed;
    seed += 11;
    cfg.embedders.emplace(std::string(stage), spec);
  }
  return cfg;
}

PipelineConfig PipelineConfig::parse(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ParseError(std::string("invalid TOML: ") + std::string(e.description()),
                     e.source().begin.line);
  }

  PipelineConfig cfg = defaults();
  read(root, "name", cfg.name);

  if (const auto* t = section(root, "paths")) {
    if (auto v = get<std::string>(*t, "corpus")) cfg.corpus_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(*t, "queries")) cfg.queries_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(*t, "qrels")) cfg.qrels_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(*t, "index")) cfg.index_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(*t, "output_dir")) cfg.output_dir = resolve(base_dir, *v);
  }

  if (const auto* t = section(root, "retrieval")) {
    if (auto v = get<std::string>(*t, "retriever")) {
      if (*v == "bm25") cfg.retriever = RetrieverKind::bm25;
      else if (*v == "dense") cfg.retriever = RetrieverKind::dense;
      else throw ParseError("retrieval.retriever must be bm25 or dense", 0);
    }
    read(*t, "guided_n", cfg.guided_n);
    read(*t, "intermediate_keep", cfg.intermediate_keep);
    read(*t, "final_keep", cfg.final_keep);
    read(*t, "run_depth", cfg.run_depth);
    read(*t, "k1", cfg.bm25.k1);
    read(*t, "b", cfg.bm25.b);
  }

  if (const auto* t = section(root, "enrichment")) {
    read(*t, "keyword_top_docs", cfg.enrichment.keyword_top_docs);
    read(*t, "keyword_span", cfg.enrichment.keyword_span);
    read(*t, "answer_top_docs", cfg.enrichment.answer_top_docs);
    if (const toml::node* n = t->get("ngram_range")) {
      const toml::array* arr = n->as_array();
      if (arr == nullptr || arr->size() != 2 || !(*arr)[0].is_integer() || !(*arr)[1].is_integer())
        throw ParseError("enrichment.ngram_range must be [low, high]" + where(n), 0);
      cfg.enrichment.ngram_range = {static_cast<std::size_t>(*(*arr)[0].value<std::int64_t>()),
                                    static_cast<std::size_t>(*(*arr)[1].value<std::int64_t>())};
    }
  }

  if (const auto* t = section(root, "filter")) {
    read(*t, "threshold", cfg.filter_threshold);
    if (auto v = get<std::string>(*t, "history_aggregation"))
      cfg.history_aggregation = parse_history_aggregation(*v);
  }

  if (const auto* t = section(root, "evaluation")) {
    std::size_t rel = static_cast<std::size_t>(cfg.evaluation.rel_threshold);
    read(*t, "rel_threshold", rel);
    cfg.evaluation.rel_threshold = static_cast<int>(rel);
    read(*t, "ndcg_k", cfg.evaluation.ndcg_k);
    if (auto v = get<std::string>(*t, "gain")) {
      if (*v == "linear") cfg.evaluation.gain = GainMode::linear;
      else if (*v == "exponential") cfg.evaluation.gain = GainMode::exponential;
      else throw ParseError("evaluation.gain must be linear or exponential", 0);
    }
  }

  if (const auto* t = section(root, "answer_extractor")) {
    if (auto v = get<std::string>(*t, "kind")) {
      if (*v == "builtin") cfg.extractor.kind = ExtractorKind::builtin;
      else if (*v == "http") cfg.extractor.kind = ExtractorKind::http;
      else throw ParseError("answer_extractor.kind must be builtin or http", 0);
    }
    if (auto v = get<std::string>(*t, "endpoint")) cfg.extractor.endpoint = *v;
    read(*t, "max_retries", cfg.extractor.max_retries);
    read(*t, "backoff_ms", cfg.extractor.backoff_ms);
    read(*t, "timeout_seconds", cfg.extractor.timeout_seconds);
  }

  if (const auto* t = section(root, "run")) {
    read(*t, "workers", cfg.workers);
    if (auto v = get<std::string>(*t, "rewriter_endpoint")) cfg.rewriter_endpoint = *v;
  }

  if (const auto* t = section(root, "embedders")) {
    for (const auto& [key, node] : *t) {
      const std::string stage(key.str());
      if (!node.is_table()) throw ParseError("[embedders." + stage + "] must be a table", 0);
      cfg.embedders[stage] = parse_embedder(*node.as_table(), stage);
    }
  }

  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse(text.str(), path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::string PipelineConfig::to_toml() const {
  toml::table root;
  root.insert("name", name);

  toml::table paths;
  paths.insert("corpus", corpus_path.generic_string());
  paths.insert("queries", queries_path.generic_string());
  if (qrels_path) paths.insert("qrels", qrels_path->generic_string());
  if (index_path) paths.insert("index", index_path->generic_string());
  paths.insert("output_dir", output_dir.generic_string());
  root.insert("paths", std::move(paths));

  toml::table retrieval;
  retrieval.insert("retriever", to_string(retriever));
  retrieval.insert("guided_n", as_int(guided_n));
  retrieval.insert("intermediate_keep", as_int(intermediate_keep));
  retrieval.insert("final_keep", as_int(final_keep));
  retrieval.insert("run_depth", as_int(run_depth));
  retrieval.insert("k1", bm25.k1);
  retrieval.insert("b", bm25.b);
  root.insert("retrieval", std::move(retrieval));

  toml::table enrich;
  enrich.insert("keyword_top_docs", as_int(enrichment.keyword_top_docs));
  enrich.insert("keyword_span", as_int(enrichment.keyword_span));
  enrich.insert("ngram_range", toml::array{as_int(enrichment.ngram_range.low),
                                           as_int(enrichment.ngram_range.high)});
  enrich.insert("answer_top_docs", as_int(enrichment.answer_top_docs));
  root.insert("enrichment", std::move(enrich));

  toml::table filter;
  filter.insert("threshold", filter_threshold);
  filter.insert("history_aggregation", to_string(history_aggregation));
  root.insert("filter", std::move(filter));

  toml::table eval;
  eval.insert("rel_threshold", evaluation.rel_threshold);
  eval.insert("ndcg_k", as_int(evaluation.ndcg_k));
  eval.insert("gain", evaluation.gain == GainMode::linear ? "linear" : "exponential");
  root.insert("evaluation", std::move(eval));

  toml::table extractor_table;
  extractor_table.insert("kind", extractor.kind == ExtractorKind::builtin ? "builtin" : "http");
  if (extractor.endpoint) extractor_table.insert("endpoint", *extractor.endpoint);
  extractor_table.insert("max_retries", extractor.max_retries);
  extractor_table.insert("backoff_ms", extractor.backoff_ms);
  extractor_table.insert("timeout_seconds", extractor.timeout_seconds);
  root.insert("answer_extractor", std::move(extractor_table));

  toml::table run;
  run.insert("workers", as_int(workers));
  if (rewriter_endpoint) run.insert("rewriter_endpoint", *rewriter_endpoint);
  root.insert("run", std::move(run));

  toml::table embedder_tables;
  for (const auto& [stage, spec] : embedders) embedder_tables.insert(stage, embedder_table(spec));
  root.insert("embedders", std::move(embedder_tables));

  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

void PipelineConfig::validate() const {
  if (guided_n == 0) throw PreconditionError("guided_n must be >= 1");
  if (final_keep == 0) throw PreconditionError("final_keep must be >= 1");
  if (intermediate_keep < final_keep)
    throw PreconditionError("intermediate_keep must be >= final_keep");
  if (run_depth == 0) throw PreconditionError("run_depth must be >= 1");
  if (filter_threshold < 0.0) throw PreconditionError("filter threshold must be >= 0");
  if (evaluation.rel_threshold < 1) throw PreconditionError("rel_threshold must be >= 1");
  if (evaluation.ndcg_k == 0) throw PreconditionError("ndcg_k must be >= 1");
  enrichment.validate();
  for (auto stage : kEmbedderStages) {
    auto it = embedders.find(std::string(stage));
    if (it == embedders.end())
      throw PreconditionError("no embedder configured for stage \"" + std::string(stage) + "\"");
  }
  for (const auto& [stage, spec] : embedders) spec.validate();
  if (extractor.kind == ExtractorKind::http && (!extractor.endpoint || extractor.endpoint->empty()))
    throw PreconditionError("http answer extractor needs an endpoint");
}

void PipelineConfig::check_inputs(bool need_qrels) const {
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty()) throw Error(std::string(what) + " path is not set");
    if (!fs::exists(p)) throw Error(std::string(what) + " not found: " + p.string());
  };
  require(corpus_path, "corpus");
  require(queries_path, "queries");
  if (need_qrels) {
    if (!qrels_path) throw Error("qrels path is not set");
    require(*qrels_path, "qrels");
  }
}

fs::path PipelineConfig::index_file() const {
  return index_path ? *index_path : output_dir / "index.gcqr";
}

const EmbedderSpec& PipelineConfig::embedder(std::string_view stage) const {
  auto it = embedders.find(std::string(stage));
  if (it == embedders.end()) {
    if (stage == kDenseStage) return embedder("rerank1");
    throw PreconditionError("no embedder configured for stage \"" + std::string(stage) + "\"");
  }
  return it->second;
}

}  // namespace guidecqr
