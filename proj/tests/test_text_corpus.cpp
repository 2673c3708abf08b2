#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "guidecqr/corpus.hpp"
#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"
#include "oracles.hpp"

using namespace guidecqr;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& body) {
  fs::path dir = fs::path(GCQR_WORK_DIR) / "corpus";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

const std::vector<std::string> kVocab = {
    "throat", "cancer", "cure", "rate",   "netflix", "stream", "film",  "voice",
    "radio",  "tumor",  "cell", "survey", "price",   "hulu",   "amazon", "apple",
    "larynx", "stage",  "five", "year",   "the",     "a",      "of",    "is"};

std::vector<Document> random_corpus(std::mt19937_64& rng, std::size_t n) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back({"d" + std::to_string(i), oracle::random_text(rng, kVocab, 3, 25)});
  }
  return docs;
}

std::vector<std::pair<std::string, std::string>> pairs(const std::vector<Document>& docs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& d : docs) out.emplace_back(d.doc_id, d.text);
  return out;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
    CHECK(tokenize("Throat cancer, cure-rate!") ==
          std::vector<std::string>{"throat", "cancer", "cure", "rate"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("A1-b2") == std::vector<std::string>{"a1", "b2"});
    CHECK(tokenize("  ...  ").empty());
    CHECK(tokenize("café Über") == std::vector<std::string>{"café", "Über"});
  }

  TEST_CASE("sentence splitting") {
    auto s = split_sentences("One two. Three?! Four");
    REQUIRE(s.size() == 3);
    CHECK(s[0].text == "One two.");
    CHECK(s[1].text == "Three?!");
    CHECK(s[2].text == "Four");
    CHECK(split_sentences("v1.2 is out").size() == 1);
    CHECK(split_sentences("   ").empty());
  }

  TEST_CASE("truncate_tokens keeps a prefix ending at the n-th token") {
    CHECK(truncate_tokens("a b, c d", 2) == "a b");
    CHECK(truncate_tokens("a b", 5) == "a b");
  }

  TEST_CASE("ingest jsonl keeps file order") {
    auto p = write_file("three.jsonl",
                        "{\"doc_id\":\"a\",\"text\":\"x\"}\n"
                        "{\"doc_id\":\"b\",\"text\":\"y\"}\n\n"
                        "{\"doc_id\":\"c\",\"text\":\"z\"}\n");
    auto docs = ingest_corpus(p, CorpusFormat::jsonl);
    REQUIRE(docs.size() == 3);
    CHECK(docs[0] == Document{"a", "x"});
    CHECK(docs[2] == Document{"c", "z"});
  }

  TEST_CASE("duplicate doc_id reports the id and the second line") {
    auto p = write_file("dup.jsonl",
                        "{\"doc_id\":\"d0\",\"text\":\"x\"}\n"
                        "{\"doc_id\":\"d1\",\"text\":\"x\"}\n"
                        "{\"doc_id\":\"d2\",\"text\":\"x\"}\n"
                        "{\"doc_id\":\"d3\",\"text\":\"x\"}\n"
                        "{\"doc_id\":\"d1\",\"text\":\"y\"}\n");
    try {
      ingest_corpus(p, CorpusFormat::jsonl);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
      CHECK(std::string(e.what()).find("d1") != std::string::npos);
    }
  }

  TEST_CASE("malformed rows carry their line number") {
    auto p = write_file("bad.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\n{\"doc_id\": 3}\n");
    try {
      ingest_corpus(p, CorpusFormat::jsonl);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    auto t = write_file("bad.tsv", "d1\tok\nno tab here\n");
    CHECK_THROWS_AS(ingest_corpus(t, CorpusFormat::tsv), ParseError);
    CHECK_THROWS_AS(ingest_corpus(write_file("blank.tsv", "d1\t   \n"), CorpusFormat::tsv),
                    ParseError);
  }

  TEST_CASE("tsv row") {
    auto p = write_file("one.tsv", "d9\tthroat cancer is curable\n");
    CHECK(corpus_format_for(p) == CorpusFormat::tsv);
    auto docs = ingest_corpus(p, CorpusFormat::tsv);
    REQUIRE(docs.size() == 1);
    CHECK(docs[0] == Document{"d9", "throat cancer is curable"});
  }

  TEST_CASE("build_index basics") {
    auto idx = build_index({{"x", "a a b"}});
    CHECK(idx.postings("a") == std::vector<Posting>{{0, 2}});
    CHECK(idx.postings("b") == std::vector<Posting>{{0, 1}});
    CHECK(idx.avg_doc_length() == 3.0);

    auto two = build_index({{"x", "p q"}, {"y", "r s t u"}});
    CHECK(two.avg_doc_length() == 3.0);
    CHECK_THROWS_AS(build_index({}), PreconditionError);
  }

  TEST_CASE("postings equal a naive term count") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      auto docs = random_corpus(rng, 10);
      auto idx = build_index(docs);
      std::map<std::string, std::map<std::uint32_t, std::uint32_t>> naive;
      double total = 0;
      for (std::uint32_t i = 0; i < docs.size(); ++i) {
        auto ws = oracle::words(docs[i].text);
        total += static_cast<double>(ws.size());
        CHECK(idx.doc_lengths()[i] == ws.size());
        for (const auto& w : ws) ++naive[w][i];
      }
      CHECK(idx.avg_doc_length() == doctest::Approx(total / 10).epsilon(1e-12));
      CHECK(idx.term_count() == naive.size());
      for (const auto& [term, per_doc] : naive) {
        std::vector<Posting> expected;
        for (auto [d, tf] : per_doc) expected.push_back({d, tf});
        CHECK(idx.postings(term) == expected);
      }
    }
  }

  TEST_CASE("bm25 ranks the exact-match document first") {
    auto idx = build_index({{"a", "the cat sat"},
                            {"b", "glottic carcinoma radiotherapy"},
                            {"c", "the dog ran"}});
    auto hits = idx.bm25("glottic carcinoma radiotherapy", 3);
    REQUIRE(!hits.empty());
    CHECK(hits[0].doc_id == "b");
    CHECK(hits.size() == 1);
  }

  TEST_CASE("bm25 equals an exhaustive scorer") {
    std::mt19937_64 rng(5);
    auto docs = random_corpus(rng, 20);
    auto idx = build_index(docs);
    auto hits = idx.bm25("throat cancer", 5);
    auto expected = oracle::bm25(pairs(docs), "throat cancer", 5);
    REQUIRE(hits.size() == expected.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].doc_id == expected[i].doc_id);
      CHECK(hits[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
    }
    CHECK(idx.bm25("throat cancer", 1000).size() <= 20);
  }

  TEST_CASE("bm25 ordering and errors") {
    std::mt19937_64 rng(9);
    auto idx = build_index(random_corpus(rng, 30));
    for (int q = 0; q < 20; ++q) {
      auto hits = idx.bm25(oracle::random_text(rng, kVocab, 1, 4), 30);
      for (std::size_t i = 1; i < hits.size(); ++i) {
        const bool ordered = hits[i - 1].score > hits[i].score ||
                             (hits[i - 1].score == hits[i].score &&
                              hits[i - 1].doc_id < hits[i].doc_id);
        CHECK(ordered);
      }
    }
    try {
      idx.bm25(" ?! ", 3);
      FAIL("expected empty query error");
    } catch (const PreconditionError& e) {
      CHECK(std::string(e.what()) == "empty query");
    }
    CHECK_THROWS_AS(idx.bm25("cancer", 0), PreconditionError);
  }

  TEST_CASE("index save/load round-trips") {
    std::mt19937_64 rng(3);
    auto idx = build_index(random_corpus(rng, 12));
    std::ostringstream first;
    idx.save(first);
    CHECK(first.str().rfind("GCQR-IDX-1\n", 0) == 0);
    std::istringstream in(first.str());
    auto back = CorpusIndex::load(in);
    std::ostringstream second;
    back.save(second);
    CHECK(first.str() == second.str());
    CHECK(back.avg_doc_length() == idx.avg_doc_length());
    CHECK(back.bm25("cancer throat", 5) == idx.bm25("cancer throat", 5));

    std::istringstream bad("not an index\n");
    CHECK_THROWS_AS(CorpusIndex::load(bad), ParseError);
  }
}
