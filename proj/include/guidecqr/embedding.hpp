#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace guidecqr {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;

  std::size_t dimension() const { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbedderKind { deterministic, http };

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::deterministic;
  std::size_t dimension = 256;
  std::uint64_t seed = 0;
  std::optional<std::string> endpoint;    // http only, e.g. "http://host:8080/v1"
  std::optional<std::string> model_name;  // http only
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  int max_retries = 3;
  int backoff_ms = 250;  // first retry delay; doubles on each retry
  int timeout_seconds = 30;

  /// Throws PreconditionError when the spec is unusable for its kind.
  void validate() const;
  std::string provider_id() const;

  friend bool operator==(const EmbedderSpec&, const EmbedderSpec&) = default;
};

/// Environment variable holding the bearer token for the HTTP providers.
inline constexpr const char* kEmbedApiKeyEnv = "GCQR_EMBED_API_KEY";

class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One vector per text, order preserved. Every text must be non-empty.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
  virtual const std::string& provider_id() const = 0;

  EmbeddingVector embed_one(const std::string& text) const;
};

/// Hashed character-3-gram counts, L2-normalised.
///
/// The lowercased text is cut into UTF-8 code points; every window of three
/// consecutive code points is hashed (FNV-1a, then mixed with the seed) into
/// one of `dimension` buckets. Texts shorter than three code points hash as a
/// single gram. The output is a pure function of (text, dimension, seed).
class DeterministicEmbedder final : public Embedder {
 public:
  DeterministicEmbedder(std::size_t dimension, std::uint64_t seed);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  const std::string& provider_id() const override { return provider_id_; }

  EmbeddingVector embed_text(const std::string& text) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::string provider_id_;
};

/// Client for `POST {endpoint}/embed` with request
/// `{"model": ..., "texts": [...]}` and response `{"vectors": [[...], ...]}`.
/// Texts are sent in batches; at most `max_in_flight` requests run at once.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(EmbedderSpec spec);
  ~HttpEmbedder() override;

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  const std::string& provider_id() const override { return provider_id_; }

 private:
  struct Limiter;

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;

  EmbedderSpec spec_;
  std::string provider_id_;
  std::unique_ptr<Limiter> limiter_;
};

/// Memoises vectors per text for one provider. Thread-safe.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<const Embedder> inner);
  ~CachingEmbedder() override;

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  const std::string& provider_id() const override { return inner_->provider_id(); }

  std::size_t cached() const;

 private:
  struct Cache;

  std::shared_ptr<const Embedder> inner_;
  std::unique_ptr<Cache> cache_;
};

std::shared_ptr<const Embedder> make_embedder(const EmbedderSpec& spec, bool memoize = true);

/// One-shot convenience over make_embedder(spec)->embed(texts).
std::vector<EmbeddingVector> embed(const EmbedderSpec& spec,
                                   std::span<const std::string> texts);

/// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws PreconditionError on a
/// dimension mismatch or a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace guidecqr
