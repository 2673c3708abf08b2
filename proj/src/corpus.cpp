#include "guidecqr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"

namespace guidecqr {

using json = nlohmann::json;

namespace {

const std::vector<Posting> kNoPostings;

Document parse_jsonl_row(std::string_view line, std::size_t line_no) {
  json row;
  try {
    row = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
  }
  if (!row.is_object() || !row.contains("doc_id") || !row.contains("text") ||
      !row["doc_id"].is_string() || !row["text"].is_string()) {
    throw ParseError("expected string fields \"doc_id\" and \"text\"", line_no);
  }
  return {row["doc_id"].get<std::string>(), row["text"].get<std::string>()};
}

Document parse_tsv_row(std::string_view line, std::size_t line_no) {
  auto tab = line.find('\t');
  if (tab == std::string_view::npos)
    throw ParseError("expected doc_id<TAB>text", line_no);
  return {std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))};
}

void check_document(const Document& d, std::size_t line_no) {
  if (d.doc_id.empty()) throw ParseError("empty doc_id", line_no);
  if (trim(d.text).empty())
    throw ParseError("blank text for doc_id \"" + d.doc_id + "\"", line_no);
}

}  // namespace

CorpusFormat corpus_format_for(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::tsv : CorpusFormat::jsonl;
}

std::vector<Document> ingest_corpus(const std::filesystem::path& path,
                                    CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path.string());

  std::vector<Document> docs;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    Document d = format == CorpusFormat::jsonl ? parse_jsonl_row(line, line_no)
                                               : parse_tsv_row(line, line_no);
    check_document(d, line_no);
    if (!seen.insert(d.doc_id).second)
      throw ParseError("duplicate doc_id \"" + d.doc_id + "\"", line_no);
    docs.push_back(std::move(d));
  }
  return docs;
}

CorpusIndex CorpusIndex::build(std::vector<Document> docs) {
  if (docs.empty()) throw PreconditionError("cannot index an empty corpus");

  CorpusIndex index;
  index.docs_ = std::move(docs);
  index.doc_lengths_.reserve(index.docs_.size());

  std::uint64_t total = 0;
  for (std::size_t pos = 0; pos < index.docs_.size(); ++pos) {
    const Document& d = index.docs_[pos];
    check_document(d, pos + 1);
    if (!index.id_to_position_.emplace(d.doc_id, pos).second)
      throw ParseError("duplicate doc_id \"" + d.doc_id + "\"", pos + 1);

    std::map<std::string, std::uint32_t> counts;
    auto tokens = tokenize(d.text);
    for (auto& t : tokens) ++counts[std::move(t)];
    for (auto& [term, tf] : counts)
      index.postings_[term].push_back({static_cast<std::uint32_t>(pos), tf});

    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += tokens.size();
  }
  index.avg_doc_length_ =
      static_cast<double>(total) / static_cast<double>(index.docs_.size());
  return index;
}

std::optional<std::size_t> CorpusIndex::position_of(std::string_view doc_id) const {
  auto it = id_to_position_.find(std::string(doc_id));
  if (it == id_to_position_.end()) return std::nullopt;
  return it->second;
}

const Document* CorpusIndex::find(std::string_view doc_id) const {
  auto pos = position_of(doc_id);
  return pos ? &docs_[*pos] : nullptr;
}

const std::vector<Posting>& CorpusIndex::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? kNoPostings : it->second;
}

std::vector<std::string> CorpusIndex::terms() const {
  std::vector<std::string> out;
  out.reserve(postings_.size());
  for (const auto& [term, _] : postings_) out.push_back(term);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ScoredDoc> CorpusIndex::bm25(std::string_view query, std::size_t k,
                                         const Bm25Params& params) const {
  if (k == 0) throw PreconditionError("k must be >= 1");
  auto tokens = tokenize(query);
  if (tokens.empty()) throw PreconditionError("empty query");

  // Unique terms in lexicographic order fix the summation order.
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());

  const double n = static_cast<double>(docs_.size());
  std::vector<double> scores(docs_.size(), 0.0);
  std::vector<bool> matched(docs_.size(), false);
  for (const auto& term : tokens) {
    const auto& plist = postings(term);
    if (plist.empty()) continue;
    const double df = static_cast<double>(plist.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const Posting& p : plist) {
      const double tf = p.tf;
      const double norm =
          params.k1 * (1.0 - params.b +
                       params.b * doc_lengths_[p.doc] / avg_doc_length_);
      scores[p.doc] += idf * tf * (params.k1 + 1.0) / (tf + norm);
      matched[p.doc] = true;
    }
  }

  std::vector<ScoredDoc> hits;
  for (std::size_t pos = 0; pos < docs_.size(); ++pos) {
    if (matched[pos]) hits.push_back({docs_[pos].doc_id, scores[pos]});
  }
  auto by_rank = [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  };
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                    hits.end(), by_rank);
  hits.resize(keep);
  return hits;
}

void CorpusIndex::save(std::ostream& out) const {
  out << kIndexMagic << '\n';
  out << json{{"doc_count", docs_.size()}, {"term_count", postings_.size()}}.dump()
      << '\n';
  for (const Document& d : docs_) {
    out << json{{"doc_id", d.doc_id}, {"text", d.text}}.dump() << '\n';
  }
  for (const auto& term : terms()) {
    json plist = json::array();
    for (const Posting& p : postings_.at(term)) plist.push_back({p.doc, p.tf});
    out << json{{"term", term}, {"postings", std::move(plist)}}.dump() << '\n';
  }
}

void CorpusIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write index file: " + path.string());
  save(out);
  if (!out) throw Error("failed writing index file: " + path.string());
}

CorpusIndex CorpusIndex::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kIndexMagic)
    throw ParseError("missing index header \"" + std::string(kIndexMagic) + "\"", 1);

  auto next = [&]() -> json {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError("truncated index file", line_no);
    try {
      return json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
  };

  try {
    json header = next();
    const auto doc_count = header.at("doc_count").get<std::size_t>();
    const auto term_count = header.at("term_count").get<std::size_t>();
    if (doc_count == 0) throw ParseError("index has no documents", line_no);

    std::vector<Document> docs;
    docs.reserve(doc_count);
    for (std::size_t i = 0; i < doc_count; ++i) {
      json row = next();
      docs.push_back({row.at("doc_id").get<std::string>(),
                      row.at("text").get<std::string>()});
    }

    CorpusIndex index;
    index.docs_ = std::move(docs);
    index.doc_lengths_.assign(doc_count, 0);
    for (std::size_t pos = 0; pos < doc_count; ++pos) {
      if (!index.id_to_position_.emplace(index.docs_[pos].doc_id, pos).second)
        throw ParseError("duplicate doc_id \"" + index.docs_[pos].doc_id + "\"",
                         pos + 3);
    }
    std::uint64_t total = 0;
    for (std::size_t t = 0; t < term_count; ++t) {
      json row = next();
      std::vector<Posting> plist;
      for (const auto& p : row.at("postings")) {
        Posting posting{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
        if (posting.doc >= doc_count)
          throw ParseError("posting references unknown document", line_no);
        index.doc_lengths_[posting.doc] += posting.tf;
        total += posting.tf;
        plist.push_back(posting);
      }
      index.postings_.emplace(row.at("term").get<std::string>(), std::move(plist));
    }
    index.avg_doc_length_ =
        static_cast<double>(total) / static_cast<double>(doc_count);
    return index;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed index record: ") + e.what(), line_no);
  }
}

CorpusIndex CorpusIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index file: " + path.string());
  return load(in);
}

}  // namespace guidecqr
