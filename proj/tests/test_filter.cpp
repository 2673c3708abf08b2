#include <doctest.h>

#include <random>

#include "guidecqr/error.hpp"
#include "guidecqr/filter.hpp"
#include "oracles.hpp"

using namespace guidecqr;

namespace {

EmbeddingVector vec(std::vector<double> v) { return {std::move(v), "test"}; }

ConversationTurn netflix_turn() {
  ConversationTurn t;
  t.conversation_id = "49";
  t.turn_id = 5;
  t.raw_query = "What are its other competitors?";
  t.baseline_query = "What are Netflix's other competitors?";
  t.history = {"What is Netflix?", "Who are its competitors?"};
  return t;
}

std::vector<EnrichmentItem> keyword_items(std::initializer_list<const char*> texts) {
  std::vector<EnrichmentItem> out;
  for (const char* t : texts) out.push_back({ItemKind::keyword, t, {}, {}});
  return out;
}

}  // namespace

TEST_SUITE("filter") {
  TEST_CASE("query_score examples") {
    auto u = vec({1, 2, 2}), v = vec({2, 1, 2});
    CHECK(query_score(u, u) == 0.0);
    CHECK(query_score(vec({1, 0}), vec({0, 1})) == 10.0);
    CHECK(query_score(u, v) == doctest::Approx(10.0 * (1.0 - 8.0 / 9.0)).epsilon(1e-12));
  }

  TEST_CASE("history_score examples") {
    auto item = vec({1, 0});
    std::vector<EmbeddingVector> same = {vec({1, 0})};
    CHECK(history_score(same, item) == 0.0);
    std::vector<EmbeddingVector> two = {vec({1, 0}), vec({0, 1})};
    CHECK(history_score(two, item) == 10.0);
    CHECK(history_score(two, item, HistoryAggregation::min_distance) == 0.0);
    CHECK(history_score({}, item) == 0.0);
  }

  TEST_CASE("history_score equals elementwise max and min over random triples") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0, 1);
    auto rnd = [&] {
      std::vector<double> v(12);
      for (auto& x : v) x = g(rng);
      return v;
    };
    for (int i = 0; i < 50; ++i) {
      std::vector<std::vector<double>> h = {rnd(), rnd(), rnd()};
      auto item = rnd();
      std::vector<EmbeddingVector> hv;
      double mx = -1, mn = 1e9;
      for (const auto& x : h) {
        hv.push_back(vec(x));
        const double d = 10.0 * (1.0 - oracle::dot_cosine(x, item));
        mx = std::max(mx, d);
        mn = std::min(mn, d);
      }
      CHECK(std::abs(history_score(hv, vec(item)) - mx) <= 1e-9);
      CHECK(std::abs(history_score(hv, vec(item), HistoryAggregation::min_distance) - mn) <=
            1e-9);
    }
  }

  TEST_CASE("filter_score is the mean") {
    CHECK(filter_score(0, 0) == 0);
    CHECK(filter_score(10, 0) == 5);
    const double qs = 10.0 * (1.0 - 8.0 / 9.0);
    CHECK(filter_score(qs, 10.0) == doctest::Approx((qs + 10.0) / 2).epsilon(1e-15));
    CHECK_THROWS_AS(filter_score(-1, 0), PreconditionError);
  }

  TEST_CASE("an item repeating the query and history scores 0 and is dropped") {
    DeterministicEmbedder e(256, 9);
    ConversationTurn t;
    t.conversation_id = "31";
    t.turn_id = 2;
    t.baseline_query = "throat cancer";
    t.history = {"throat cancer"};
    auto r = filter_items(keyword_items({"throat cancer", "radiotherapy"}), t, 0.01, e);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].text == "throat cancer");
    CHECK(*r.dropped[0].filter_score == doctest::Approx(0.0).epsilon(1e-12));
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].text == "radiotherapy");
    CHECK(r.kept[0].embedding.has_value());
  }

  TEST_CASE("threshold monotonicity and partition") {
    DeterministicEmbedder e(256, 10);
    auto t = netflix_turn();
    auto items = keyword_items({"netflix", "competitors", "subscription", "streaming", "hulu",
                                "amazon", "other", "what", "presto", "viaplay"});
    items.push_back({ItemKind::answer, "Hulu Plus and Amazon Instant Video compete.", {}, {}});

    auto all = filter_items(items, t, 0.0, e);
    CHECK(all.kept.size() == items.size());
    CHECK(all.dropped.empty());

    std::vector<std::string> prev;
    for (const auto& k : all.kept) prev.push_back(k.text);
    for (double th : {0.5, 1.19, 3.0, 5.0, 6.0, 8.0, 20.0}) {
      auto r = filter_items(items, t, th, e);
      CHECK(r.kept.size() + r.dropped.size() == items.size());
      std::vector<std::string> kept;
      for (const auto& k : r.kept) {
        kept.push_back(k.text);
        CHECK(*k.filter_score >= th);
        CHECK(std::find(prev.begin(), prev.end(), k.text) != prev.end());
      }
      for (const auto& d : r.dropped) CHECK(*d.filter_score < th);
      // Each list keeps input order.
      std::size_t last = 0;
      for (const auto& k : r.kept) {
        std::size_t pos = 0;
        while (items[pos].text != k.text) ++pos;
        CHECK(pos >= last);
        last = pos;
      }
      prev = kept;
    }
    CHECK_THROWS_AS(filter_items(items, t, -1, e), PreconditionError);
  }

  TEST_CASE("unify") {
    auto t = netflix_turn();
    auto empty = unify(t, std::vector<std::string>{}, "");
    CHECK(empty.final_text == t.baseline_query);

    std::vector<std::string> kws = {"netflix", "competitors", "Netflix"};
    auto q = unify(t, kws, "");
    CHECK(q.kept_keywords == std::vector<std::string>{"netflix", "competitors"});
    CHECK(q.final_text == "What are Netflix's other competitors? netflix competitors");

    const std::vector<std::string> four_kws = {"netflix", "competitors", "subscription", "streaming"};
    auto shaped = unify(t, four_kws, "Hulu and Amazon compete.");
    CHECK(shaped.final_text ==
          "What are Netflix's other competitors? netflix competitors subscription streaming "
          "Hulu and Amazon compete.");
    CHECK(shaped.final_text.rfind(t.baseline_query, 0) == 0);

    auto only_answer = unify(t, std::vector<std::string>{}, "An answer.");
    CHECK(only_answer.final_text == t.baseline_query + " An answer.");

    auto js = to_json(shaped);
    std::vector<std::string> keys;
    for (auto it = js.begin(); it != js.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"conversation_id", "turn_id", "baseline",
                                           "kept_keywords", "kept_answer", "final_text",
                                           "dropped"});
  }

  TEST_CASE("history aggregation names") {
    CHECK(parse_history_aggregation("min_distance") == HistoryAggregation::min_distance);
    CHECK(std::string(to_string(HistoryAggregation::max_distance)) == "max_distance");
    CHECK_THROWS_AS(parse_history_aggregation("avg"), PreconditionError);
  }
}
