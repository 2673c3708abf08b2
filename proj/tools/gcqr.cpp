// gcqr: command line front end for the guided-document query reformulation
// pipeline.
//
//   gcqr index       --config cfg.toml
//   gcqr reformulate --config cfg.toml [--filter-threshold 1.19] [--guided-n 2000]
//                                       [--span 15] [--top-docs 4]
//   gcqr evaluate    --config cfg.toml [--run out/guidecqr.run] [--baseline out/baseline.run]
//   gcqr sweep       --config cfg.toml --axis guided_n --values 10,100,1000,2000
//
// Exit codes: 0 success, 2 partial failure (some turns or sweep rows failed),
// 1 fatal error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "guidecqr/config.hpp"
#include "guidecqr/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<double> filter_threshold;
  std::optional<std::size_t> guided_n;
  std::optional<std::size_t> span;
  std::optional<std::size_t> top_docs;
  std::optional<std::string> output_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--filter-threshold", filter_threshold, "FilterScore threshold");
    cmd->add_option("--guided-n", guided_n, "Number of initially retrieved guided documents");
    cmd->add_option("--span", span, "Keywords kept per guided document");
    cmd->add_option("--top-docs", top_docs, "Guided documents used for keyword augmentation");
    cmd->add_option("--output-dir", output_dir, "Directory for generated artifacts");
  }

  void apply(guidecqr::PipelineConfig& cfg) const {
    if (filter_threshold) cfg.filter_threshold = *filter_threshold;
    if (guided_n) cfg.guided_n = *guided_n;
    if (span) cfg.enrichment.keyword_span = *span;
    if (top_docs) cfg.enrichment.keyword_top_docs = *top_docs;
    if (output_dir) cfg.output_dir = *output_dir;
    cfg.validate();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided-document conversational query reformulation"};
  app.require_subcommand(1);

  std::string config_path;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* index_cmd = app.add_subcommand("index", "Build the corpus index");
  auto* reformulate_cmd = app.add_subcommand("reformulate", "Reformulate every turn and emit runs");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score run files against qrels");
  auto* sweep_cmd = app.add_subcommand("sweep", "Reformulate and evaluate over a parameter grid");

  Overrides overrides;
  for (auto* cmd : {index_cmd, reformulate_cmd, evaluate_cmd, sweep_cmd}) {
    cmd->add_option("--config", config_path, "TOML config file")->required();
    overrides.attach(cmd);
  }

  std::optional<std::string> run_path, baseline_path;
  evaluate_cmd->add_option("--run", run_path, "Run file (default: <output_dir>/guidecqr.run)");
  evaluate_cmd->add_option("--baseline", baseline_path, "Baseline run to compare against");

  std::string axis;
  std::vector<double> values;
  sweep_cmd->add_option("--axis", axis, "guided_n | keyword_top_docs | keyword_span | filter_threshold")
      ->required();
  sweep_cmd->add_option("--values", values, "Comma separated values")->required()->delimiter(',');

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("gcqr"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    auto cfg = guidecqr::PipelineConfig::load(config_path);
    overrides.apply(cfg);

    if (*index_cmd) {
      const auto s = guidecqr::cmd_index(cfg);
      std::cout << s.index_file.string() << ": " << s.doc_count << " documents, " << s.term_count
                << " terms\n";
      return guidecqr::kExitOk;
    }
    if (*reformulate_cmd) {
      const auto s = guidecqr::cmd_reformulate(cfg);
      std::cout << "reformulated " << s.turns - s.failed << "/" << s.turns << " turns into "
                << cfg.output_dir.string() << "\n";
      for (const auto& f : s.failures) std::cerr << "failed: " << f << "\n";
      return s.exit_code();
    }
    if (*evaluate_cmd) {
      std::optional<std::filesystem::path> run, base;
      if (run_path) run = *run_path;
      if (baseline_path) base = *baseline_path;
      std::cout << guidecqr::cmd_evaluate(cfg, run, base).dump(2) << "\n";
      return guidecqr::kExitOk;
    }
    if (*sweep_cmd) {
      const auto report = guidecqr::cmd_sweep(cfg, guidecqr::parse_sweep_axis(axis), values);
      std::cout << "wrote " << report.csv_path.string() << " and " << report.json_path.string()
                << "\n";
      for (const auto& row : report.rows) {
        std::cout << axis << "=" << guidecqr::format_number(row.value) << "  "
                  << (row.ok ? "MRR=" + guidecqr::format_number(row.mrr) +
                                   " NDCG=" + guidecqr::format_number(row.ndcg)
                             : "error: " + row.error)
                  << "\n";
      }
      bool partial = false;
      for (const auto& row : report.rows) partial |= !row.ok || row.failed_turns > 0;
      return partial ? guidecqr::kExitPartial : guidecqr::kExitOk;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return guidecqr::kExitFatal;
  }
  return guidecqr::kExitFatal;
}
