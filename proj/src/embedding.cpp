#include "guidecqr/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <mutex>
#include <semaphore>
#include <unordered_map>

#include <json.hpp>

#include "guidecqr/error.hpp"
#include "guidecqr/text.hpp"
#include "http_json.hpp"

namespace guidecqr {

namespace {

constexpr std::size_t kMinDimension = 8;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Byte offsets of each UTF-8 code point start, plus a final end offset.
std::vector<std::size_t> code_point_starts(std::string_view s) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  starts.push_back(s.size());
  return starts;
}

void require_texts(std::span<const std::string> texts) {
  if (texts.empty()) throw PreconditionError("embed: no texts given");
  for (const auto& t : texts)
    if (t.empty()) throw PreconditionError("embed: empty text");
}

}  // namespace

void EmbedderSpec::validate() const {
  switch (kind) {
    case EmbedderKind::deterministic:
      if (dimension < kMinDimension)
        throw PreconditionError("deterministic embedder needs dimension >= 8");
      break;
    case EmbedderKind::http:
      if (!endpoint || endpoint->empty())
        throw PreconditionError("http embedder needs an endpoint");
      if (batch_size == 0 || max_in_flight == 0)
        throw PreconditionError("http embedder needs batch_size and max_in_flight >= 1");
      break;
  }
}

std::string EmbedderSpec::provider_id() const {
  if (kind == EmbedderKind::deterministic)
    return "deterministic-d" + std::to_string(dimension) + "-s" + std::to_string(seed);
  return "http:" + endpoint.value_or("") + "#" + model_name.value_or("");
}

EmbeddingVector Embedder::embed_one(const std::string& text) const {
  return std::move(embed(std::span<const std::string>(&text, 1)).front());
}

// --- deterministic ----------------------------------------------------------

DeterministicEmbedder::DeterministicEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  EmbedderSpec spec;
  spec.dimension = dimension;
  spec.seed = seed;
  spec.validate();
  provider_id_ = spec.provider_id();
}

EmbeddingVector DeterministicEmbedder::embed_text(const std::string& text) const {
  if (text.empty()) throw PreconditionError("embed: empty text");
  const std::string lowered = to_lower(text);
  const std::string_view view = lowered;
  const auto starts = code_point_starts(view);
  const std::size_t chars = starts.size() - 1;
  const std::uint64_t salt = splitmix64(seed_);

  std::vector<double> values(dimension_, 0.0);
  auto add = [&](std::string_view gram) {
    const std::uint64_t h = splitmix64(fnv1a64(gram) ^ salt);
    values[h % dimension_] += 1.0;
  };
  if (chars < 3) {
    add(view);
  } else {
    for (std::size_t i = 0; i + 3 <= chars; ++i)
      add(view.substr(starts[i], starts[i + 3] - starts[i]));
  }

  double norm = 0.0;
  for (double x : values) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : values) x /= norm;
  return {std::move(values), provider_id_};
}

std::vector<EmbeddingVector> DeterministicEmbedder::embed(
    std::span<const std::string> texts) const {
  require_texts(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

// --- http -------------------------------------------------------------------

struct HttpEmbedder::Limiter {
  explicit Limiter(std::size_t n) : slots(static_cast<std::ptrdiff_t>(n)) {}
  std::counting_semaphore<> slots;
};

HttpEmbedder::HttpEmbedder(EmbedderSpec spec) : spec_(std::move(spec)) {
  spec_.kind = EmbedderKind::http;
  spec_.validate();
  provider_id_ = spec_.provider_id();
  limiter_ = std::make_unique<Limiter>(spec_.max_in_flight);
}

HttpEmbedder::~HttpEmbedder() = default;

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(
    std::span<const std::string> texts) const {
  nlohmann::json body{{"model", spec_.model_name.value_or("")},
                      {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  limiter_->slots.acquire();
  nlohmann::json reply;
  try {
    reply = detail::post_json(*spec_.endpoint, "/embed", body,
                              {spec_.max_retries, spec_.backoff_ms, spec_.timeout_seconds});
  } catch (...) {
    limiter_->slots.release();
    throw;
  }
  limiter_->slots.release();

  if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array())
    throw ProtocolError("embed reply lacks a \"vectors\" array");
  const auto& vectors = reply["vectors"];
  if (vectors.size() != texts.size())
    throw ProtocolError("embed reply has " + std::to_string(vectors.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& v : vectors) {
    if (!v.is_array()) throw ProtocolError("embed reply vector is not an array");
    EmbeddingVector e{{}, provider_id_};
    e.values.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw ProtocolError("embed reply vector has a non-number");
      e.values.push_back(x.get<double>());
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) const {
  require_texts(texts);
  std::vector<std::future<std::vector<EmbeddingVector>>> batches;
  for (std::size_t begin = 0; begin < texts.size(); begin += spec_.batch_size) {
    auto part = texts.subspan(begin, std::min(spec_.batch_size, texts.size() - begin));
    batches.push_back(std::async(std::launch::async,
                                 [this, part] { return embed_batch(part); }));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& f : batches) {
    for (auto& v : f.get()) out.push_back(std::move(v));
  }
  const std::size_t dim = out.front().dimension();
  if (dim < kMinDimension) throw ProtocolError("embedding dimension below 8");
  for (const auto& v : out)
    if (v.dimension() != dim) throw ProtocolError("embed reply dimensions differ");
  return out;
}

// --- memo -------------------------------------------------------------------

struct CachingEmbedder::Cache {
  mutable std::mutex mu;
  std::unordered_map<std::string, EmbeddingVector> vectors;
};

CachingEmbedder::CachingEmbedder(std::shared_ptr<const Embedder> inner)
    : inner_(std::move(inner)), cache_(std::make_unique<Cache>()) {}

CachingEmbedder::~CachingEmbedder() = default;

std::size_t CachingEmbedder::cached() const {
  std::lock_guard lock(cache_->mu);
  return cache_->vectors.size();
}

std::vector<EmbeddingVector> CachingEmbedder::embed(std::span<const std::string> texts) const {
  require_texts(texts);
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> missing;
  {
    std::lock_guard lock(cache_->mu);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = cache_->vectors.find(texts[i]);
      if (it != cache_->vectors.end()) {
        out[i] = it->second;
      } else if (std::find(missing.begin(), missing.end(), texts[i]) == missing.end()) {
        missing.push_back(texts[i]);
      }
    }
  }
  if (missing.empty()) return out;

  auto fresh = inner_->embed(missing);
  std::lock_guard lock(cache_->mu);
  for (std::size_t i = 0; i < missing.size(); ++i)
    cache_->vectors.emplace(missing[i], std::move(fresh[i]));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (out[i].values.empty()) out[i] = cache_->vectors.at(texts[i]);
  }
  return out;
}

std::shared_ptr<const Embedder> make_embedder(const EmbedderSpec& spec, bool memoize) {
  spec.validate();
  std::shared_ptr<const Embedder> base;
  if (spec.kind == EmbedderKind::deterministic) {
    base = std::make_shared<DeterministicEmbedder>(spec.dimension, spec.seed);
  } else {
    base = std::make_shared<HttpEmbedder>(spec);
  }
  if (!memoize) return base;
  return std::make_shared<CachingEmbedder>(std::move(base));
}

std::vector<EmbeddingVector> embed(const EmbedderSpec& spec,
                                   std::span<const std::string> texts) {
  return make_embedder(spec, false)->embed(texts);
}

// --- similarity -------------------------------------------------------------

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw PreconditionError("cosine: dimension mismatch (" + std::to_string(u.size()) +
                            " vs " + std::to_string(v.size()) + ")");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw PreconditionError("cosine: zero vector");
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine_similarity(std::span<const double>(u.values),
                           std::span<const double>(v.values));
}

}  // namespace guidecqr
