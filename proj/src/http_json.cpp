#include "http_json.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "guidecqr/embedding.hpp"
#include "guidecqr/error.hpp"

namespace guidecqr::detail {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing '/'
};

SplitUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos)
    throw PreconditionError("endpoint must include a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  SplitUrl out;
  out.origin = url.substr(0, slash);
  if (slash != std::string::npos) out.prefix = url.substr(slash);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const HttpRetryPolicy& policy) {
  const SplitUrl url = split_url(base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(policy.timeout_seconds, 0);
  client.set_read_timeout(policy.timeout_seconds, 0);
  client.set_write_timeout(policy.timeout_seconds, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(kEmbedApiKeyEnv); key != nullptr && *key != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const std::string target = url.prefix + path;
  const std::string payload = body.dump();

  int delay_ms = policy.backoff_ms;
  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(target, headers, payload, "application/json");
    int status = res ? res->status : 0;
    if (res && status >= 200 && status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError("invalid JSON from " + base_url + target + ": " + e.what());
      }
    }
    std::string reason = res ? "HTTP error from " + base_url + target
                             : "request to " + base_url + target + " failed: " +
                                   httplib::to_string(res.error());
    if (res && !retryable_status(status)) throw HttpError(reason, status);
    if (attempt >= policy.max_retries) throw HttpError(reason, status);
    spdlog::warn("{} (status {}), retrying in {} ms", reason, status, delay_ms);
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    delay_ms *= 2;
  }
}

}  // namespace guidecqr::detail
