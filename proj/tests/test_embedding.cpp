#include <doctest.h>

#include <cmath>
#include <random>

#include "guidecqr/embedding.hpp"
#include "guidecqr/error.hpp"
#include "oracles.hpp"

using namespace guidecqr;

namespace {

// Straightforward re-derivation of the hashed 3-gram vector for ASCII text.
std::vector<double> hashed_trigrams(const std::string& text, std::size_t dim,
                                    std::uint64_t seed) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  auto fnv = [](const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
  };
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::vector<double> v(dim, 0.0);
  std::vector<std::string> grams;
  if (lower.size() < 3) grams.push_back(lower);
  for (std::size_t i = 0; i + 3 <= lower.size(); ++i) grams.push_back(lower.substr(i, 3));
  for (const auto& g : grams) v[mix(fnv(g) ^ mix(seed)) % dim] += 1;
  double n = 0;
  for (double x : v) n += x * x;
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("deterministic provider: identical texts give identical unit vectors") {
    EmbedderSpec spec;
    spec.dimension = 64;
    spec.seed = 7;
    const std::vector<std::string> texts = {"abc", "abc"};
    auto out = embed(spec, texts);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == out[1]);
    CHECK(out[0].dimension() == 64);
    CHECK(out[0].provider_id == "deterministic-d64-s7");
    double norm = 0;
    for (double x : out[0].values) norm += x * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("empty text and empty batch are precondition errors") {
    EmbedderSpec spec;
    spec.dimension = 64;
    const std::vector<std::string> blank = {""};
    CHECK_THROWS_AS(embed(spec, blank), PreconditionError);
    CHECK_THROWS_AS(embed(spec, std::vector<std::string>{}), PreconditionError);
    spec.dimension = 4;
    CHECK_THROWS_AS(spec.validate(), PreconditionError);
    EmbedderSpec http;
    http.kind = EmbedderKind::http;
    CHECK_THROWS_AS(http.validate(), PreconditionError);
  }

  TEST_CASE("abc vs xyz matches the hand-rolled hashed trigram oracle") {
    DeterministicEmbedder e(64, 7);
    auto a = e.embed_text("abc");
    auto x = e.embed_text("xyz");
    CHECK(a.values == hashed_trigrams("abc", 64, 7));
    CHECK(x.values == hashed_trigrams("xyz", 64, 7));
    const double expected = oracle::dot_cosine(a.values, x.values);
    CHECK(cosine_similarity(a, x) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(cosine_similarity(a, x) < 1.0);
    for (const char* t : {"Throat Cancer", "hi", "Netflix competitors"})
      CHECK(e.embed_text(t).values == hashed_trigrams(t, 64, 7));
  }

  TEST_CASE("embedding is a pure function of text, dimension and seed") {
    DeterministicEmbedder a(128, 1), b(128, 1), c(128, 2);
    CHECK(a.embed_text("Is it treatable?") == b.embed_text("Is it treatable?"));
    CHECK(a.embed_text("Is it treatable?").values != c.embed_text("Is it treatable?").values);
    CHECK(a.embed_text("CANCER") == a.embed_text("cancer"));
  }

  TEST_CASE("cosine examples") {
    const std::vector<double> u = {1, 2, 2}, v = {2, 1, 2};
    CHECK(cosine_similarity(u, v) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    const std::vector<double> e1 = {1, 0, 0}, e2 = {0, 1, 0};
    CHECK(cosine_similarity(e1, e2) == 0.0);
    CHECK(cosine_similarity(e1, e1) == 1.0);
    const std::vector<double> zero = {0, 0, 0}, short_v = {1, 2};
    CHECK_THROWS_AS(cosine_similarity(u, zero), PreconditionError);
    CHECK_THROWS_AS(cosine_similarity(u, short_v), PreconditionError);
  }

  TEST_CASE("cosine properties on random vectors") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g(0, 1);
    std::uniform_real_distribution<double> alpha(0.01, 100);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> u(16), v(16);
      for (auto& x : u) x = g(rng);
      for (auto& x : v) x = g(rng);
      const double uv = cosine_similarity(u, v);
      CHECK(uv == cosine_similarity(v, u));
      CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(uv >= -1.0);
      CHECK(uv <= 1.0);
      auto scaled = u;
      const double a = alpha(rng);
      for (auto& x : scaled) x *= a;
      CHECK(std::abs(cosine_similarity(scaled, v) - uv) <= 1e-9);
    }
  }

  TEST_CASE("caching embedder returns the inner vectors") {
    auto inner = std::make_shared<DeterministicEmbedder>(32, 3);
    CachingEmbedder cache(inner);
    const std::vector<std::string> texts = {"one", "two", "one"};
    auto out = cache.embed(texts);
    CHECK(cache.cached() == 2);
    CHECK(out[0] == inner->embed_text("one"));
    CHECK(out[1] == inner->embed_text("two"));
    CHECK(out[2] == out[0]);
    CHECK(cache.provider_id() == inner->provider_id());
  }
}
