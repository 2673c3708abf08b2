#include "guidecqr/trec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"

namespace guidecqr {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Run grouped by qid, each group ordered by rank.
std::map<std::string, std::vector<const RunEntry*>> group_run(std::span<const RunEntry> run) {
  std::map<std::string, std::vector<const RunEntry*>> groups;
  for (const RunEntry& e : run) groups[e.qid].push_back(&e);
  for (auto& [_, entries] : groups) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
  }
  return groups;
}

int judged(const std::map<std::string, int>& rels, const std::string& doc_id) {
  auto it = rels.find(doc_id);
  return it == rels.end() ? 0 : it->second;
}

double gain(int rel, GainMode mode) {
  if (rel <= 0) return 0.0;
  return mode == GainMode::linear ? rel : std::exp2(rel) - 1.0;
}

double reciprocal_rank(const std::vector<const RunEntry*>& entries,
                       const std::map<std::string, int>& rels, int threshold) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (judged(rels, entries[i]->doc_id) >= threshold) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

bool has_relevant(const std::map<std::string, int>& rels, int threshold) {
  return std::any_of(rels.begin(), rels.end(),
                     [&](const auto& kv) { return kv.second >= threshold; });
}

double ndcg(const std::vector<const RunEntry*>& entries,
            const std::map<std::string, int>& rels, std::size_t k, GainMode mode) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, entries.size()); ++i)
    dcg += gain(judged(rels, entries[i]->doc_id), mode) / std::log2(static_cast<double>(i + 2));

  std::vector<int> ideal;
  for (const auto& [_, rel] : rels) ideal.push_back(rel);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
    idcg += gain(ideal[i], mode) / std::log2(static_cast<double>(i + 2));
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

const char* gain_name(GainMode mode) {
  return mode == GainMode::linear ? "linear" : "exponential";
}

}  // namespace

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [_, docs] : judgments) n += docs.size();
  return n;
}

Qrels parse_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 4) throw ParseError("expected `qid 0 docid rel`", line_no);
    int rel = 0;
    if (!parse_number(f[3], rel)) throw ParseError("non-integer relevance \"" + std::string(f[3]) + "\"", line_no);
    if (rel < 0 || rel > 4) throw ParseError("relevance out of range 0..4", line_no);
    auto& docs = qrels.judgments[std::string(f[0])];
    if (!docs.emplace(std::string(f[2]), rel).second)
      throw ParseError("duplicate judgment for " + std::string(f[0]) + " " + std::string(f[2]),
                       line_no);
  }
  return qrels;
}

Qrels parse_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open qrels file: " + path.string());
  return parse_qrels(in);
}

void write_run(std::ostream& out, std::span<const RunEntry> run) {
  for (const RunEntry& e : run) {
    out << e.qid << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_double(e.score)
        << ' ' << e.tag << '\n';
  }
}

void write_run(const std::filesystem::path& path, std::span<const RunEntry> run) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write run file: " + path.string());
  write_run(out, run);
}

Run read_run(std::istream& in) {
  Run run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) throw ParseError("expected `qid Q0 docid rank score tag`", line_no);
    RunEntry e;
    e.qid = f[0];
    e.doc_id = f[2];
    if (!parse_number(f[3], e.rank) || e.rank < 1) throw ParseError("bad rank", line_no);
    if (!parse_number(f[4], e.score)) throw ParseError("bad score", line_no);
    e.tag = f[5];
    run.push_back(std::move(e));
  }
  return run;
}

Run read_run(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open run file: " + path.string());
  return read_run(in);
}

Run to_run(const std::string& qid, std::span<const ScoredDoc> docs, const std::string& tag) {
  Run run;
  run.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i)
    run.push_back({qid, docs[i].doc_id, static_cast<int>(i + 1), docs[i].score, tag});
  return run;
}

Run to_run(const RankedList& list, const std::string& tag) {
  return to_run(list.qid(), list.entries, tag);
}

double mrr(std::span<const RunEntry> run, const Qrels& qrels, int rel_threshold) {
  if (run.empty()) throw PreconditionError("mrr: empty run");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, entries] : group_run(run)) {
    auto it = qrels.judgments.find(qid);
    if (it == qrels.judgments.end() || !has_relevant(it->second, rel_threshold)) continue;
    sum += reciprocal_rank(entries, it->second, rel_threshold);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double ndcg_at_k(std::span<const RunEntry> run, const Qrels& qrels, std::size_t k,
                 GainMode gain_mode) {
  if (run.empty()) throw PreconditionError("ndcg: empty run");
  if (k == 0) throw PreconditionError("ndcg: k must be >= 1");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, entries] : group_run(run)) {
    auto it = qrels.judgments.find(qid);
    if (it == qrels.judgments.end()) continue;
    sum += ndcg(entries, it->second, k, gain_mode);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

EvalReport evaluate(std::span<const RunEntry> run, const Qrels& qrels,
                    const EvalOptions& options) {
  if (options.ndcg_k == 0) throw PreconditionError("ndcg: k must be >= 1");
  EvalReport report;
  report.options = options;
  const auto groups = group_run(run);
  double rr_sum = 0.0, ndcg_sum = 0.0;
  for (const auto& [qid, entries] : groups) {
    auto it = qrels.judgments.find(qid);
    if (it == qrels.judgments.end()) {
      report.run_only.push_back(qid);
      continue;
    }
    QueryMetrics m;
    m.has_relevant = has_relevant(it->second, options.rel_threshold);
    m.reciprocal_rank =
        m.has_relevant ? reciprocal_rank(entries, it->second, options.rel_threshold) : 0.0;
    m.ndcg = ndcg(entries, it->second, options.ndcg_k, options.gain);
    if (m.has_relevant) {
      rr_sum += m.reciprocal_rank;
      ++report.mrr_evaluated;
    }
    ndcg_sum += m.ndcg;
    ++report.evaluated;
    report.per_query.emplace(qid, m);
  }
  for (const auto& [qid, _] : qrels.judgments)
    if (!groups.count(qid)) report.qrels_only.push_back(qid);
  if (report.mrr_evaluated > 0) report.mrr = rr_sum / static_cast<double>(report.mrr_evaluated);
  if (report.evaluated > 0) report.ndcg = ndcg_sum / static_cast<double>(report.evaluated);
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  const std::string ndcg_key = "NDCG@" + std::to_string(report.options.ndcg_k);
  nlohmann::ordered_json per_query = nlohmann::ordered_json::object();
  for (const auto& [qid, m] : report.per_query) {
    nlohmann::ordered_json q;
    q["MRR"] = m.reciprocal_rank;
    q[ndcg_key] = m.ndcg;
    q["has_relevant"] = m.has_relevant;
    per_query[qid] = std::move(q);
  }
  nlohmann::ordered_json out;
  out["MRR"] = report.mrr;
  out[ndcg_key] = report.ndcg;
  out["evaluated_queries"] = report.evaluated;
  out["mrr_evaluated_queries"] = report.mrr_evaluated;
  out["rel_threshold"] = report.options.rel_threshold;
  out["gain"] = gain_name(report.options.gain);
  out["per_query"] = std::move(per_query);
  out["run_only_queries"] = report.run_only;
  out["qrels_only_queries"] = report.qrels_only;
  if (report.evaluated == 0) out["warning"] = "no query of the run has relevance judgments";
  return out;
}

Precision keyword_precision_counts(std::span<const KeywordCandidate> keywords,
                                   const Qrels& qrels, const std::string& qid,
                                   const CorpusIndex& doc_table) {
  std::set<std::string> unique;
  for (const auto& k : keywords) {
    std::string folded = to_lower(trim(k.text));
    if (!folded.empty()) unique.insert(std::move(folded));
  }

  std::unordered_set<std::string> vocabulary;
  if (auto it = qrels.judgments.find(qid); it != qrels.judgments.end()) {
    for (const auto& [doc_id, rel] : it->second) {
      if (rel != 4) continue;
      const Document* doc = doc_table.find(doc_id);
      if (doc == nullptr) {
        spdlog::warn("keyword precision: judged doc {} of {} not in corpus", doc_id, qid);
        continue;
      }
      for (auto& t : tokenize(doc->text)) vocabulary.insert(std::move(t));
    }
  }

  Precision p;
  p.total = unique.size();
  for (const auto& kw : unique) {
    const auto tokens = tokenize(kw);
    if (tokens.empty()) continue;
    if (std::all_of(tokens.begin(), tokens.end(),
                    [&](const std::string& t) { return vocabulary.count(t) != 0; }))
      ++p.matched;
  }
  return p;
}

double keyword_precision(std::span<const KeywordCandidate> keywords, const Qrels& qrels,
                         const std::string& qid, const CorpusIndex& doc_table) {
  return keyword_precision_counts(keywords, qrels, qid, doc_table).value();
}

}  // namespace guidecqr
